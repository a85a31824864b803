"""Cycle-level model of a many-core RV32I overlay: clustered PEs with shared
memories on a deflection-routed torus."""
from .config import ClusterConfig, SystemConfig, load_config
from .system import System, analytic_peaks, build, measured_metrics

__all__ = ["ClusterConfig", "SystemConfig", "System", "analytic_peaks", "build",
           "load_config", "measured_metrics"]
