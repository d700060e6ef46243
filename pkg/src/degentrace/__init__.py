"""Numerical checks of spectral trace asymptotics at a flat degenerate critical point.

Modules
-------
symbol    polynomial symbols, the model family and hypothesis checks
sphere    level-set densities and directional integrals on the unit sphere
testfn    test functions with compactly supported Fourier transform
mellin    Mellin transforms, pole lattices and leading-term predictions
fiber     numerical oracles for the model oscillatory integrals, sweeps and fits
dynamics  Hamiltonian flow near the critical point and its germ
weyl      Weyl quantization in the oscillator basis and eigenvalue windows
trace     spectral distribution, predicted leading term and h-sweeps
config    model and experiment files
cli       batch command line
"""
from .symbol import (
    HypothesisError, ModelError, ModelProblem, PolynomialSymbol, build_model_symbol, check_hypotheses,
)
from .testfn import TestFunction

__all__ = [
    "HypothesisError", "ModelError", "ModelProblem", "PolynomialSymbol", "TestFunction",
    "build_model_symbol", "check_hypotheses",
]
__version__ = "0.1.0"
