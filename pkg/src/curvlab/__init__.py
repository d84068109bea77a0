"""curvlab: differential-geometric market analysis toolkit.

Submodules: paths (stochastic calculus on path ensembles), gauges (deflator /
term-structure pairs and cashflow-intensity transforms), geometry (connection,
curvature, no-arbitrage diagnostics), action (arbitrage action of strategies),
dynamics (variational flows and first integrals), marketsim (lognormal market
generator and calibration), cli (command-line front end).
"""

__version__ = "0.1.0"

from . import action, cli, dynamics, gauges, geometry, marketsim, paths  # noqa: F401,E402
