"""Low-thrust NRHO-to-LLO transfers: indirect minimum-time optimization and
closed-loop 6-DoF guidance, attitude control, and reaction-wheel actuation."""

__version__ = "0.1.0"
