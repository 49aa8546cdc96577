"""Least-squares fits for optical, mechanical and spin measurements."""
from .engine import (
    ConvergenceError,
    FitError,
    LeastSquaresSolution,
    Model,
    SingularJacobianError,
    Spectrum,
    solve_least_squares,
)
from .models import (
    FANO,
    LORENTZIAN,
    RABI,
    STRETCHED_EXP,
    backaction_model,
    fano_reflection,
    lorentzian,
    rabi_signal,
    stretched_exponential,
)
from .fits import (
    BackactionFitResult,
    CoherenceFitResult,
    FanoFitResult,
    LorentzianFitResult,
    NoOscillationError,
    RabiFitResult,
    ResonanceNotCapturedError,
    SideFit,
    fit_backaction,
    fit_fano,
    fit_lorentzian_psd,
    fit_rabi,
    fit_stretched_exponential,
    kappa_e_from_contrast,
)
