"""Symbol-wise vs bit-wise decoding of coded modulation with Gray-labeled PAM.

Modules: ``constellation`` (PAM points and labelings), ``codebook`` (block and
convolutional codes, trellises), ``channel`` (AWGN/Rayleigh, SNR conventions,
seeded streams), ``demapper`` (max-log L-values and their exact laws),
``decoder`` (S-DEC and B-DEC), ``analysis`` (pairwise distances and loss),
``exact_pep`` (exact B-DEC pairwise error probability), ``code_loss``
(asymptotic loss of a whole code), ``sim`` (Monte Carlo and importance
sampling) and ``cli``.
"""
from .analysis import MAX_LOSS_DB, pairwise_loss, weight_profile
from .constellation import Constellation, from_cli_name, make_pam
from .decoder import bdec, sdec

__all__ = [
    "MAX_LOSS_DB",
    "Constellation",
    "bdec",
    "from_cli_name",
    "make_pam",
    "pairwise_loss",
    "sdec",
    "weight_profile",
]
