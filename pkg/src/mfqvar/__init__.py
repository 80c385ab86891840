"""Mixed-frequency quantile ARCH models for Value-at-Risk.

Modules
-------
timegrid     daily/monthly panel alignment and CSV input
midas        Beta lag weights and weighted sums of monthly lags
qreg         linear quantile regression, sparsity and LR tests
mfqarch      MF-Q-ARCH(-X) design, profiled estimation, lag test, stationarity
competitors  CAViaR, GARCH/GJR, RiskMetrics and GARCH-MIDAS benchmarks
forecast     rolling-window one-step-ahead VaR
backtest     AE, UC, CC and DQ backtests
mcs          Model Confidence Set on the quantile loss
simulate     data-generating process and Monte Carlo study
cli          batch command line
"""
from .errors import (
    ConfigurationError,
    DataError,
    EstimationError,
    MfqVarError,
)

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "DataError", "EstimationError", "MfqVarError", "__version__"]
