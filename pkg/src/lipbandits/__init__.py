"""Instance-adaptive Lipschitz bandits: phased adaptive covering, uniform-sampling
experts, and the integral/packing quantities that describe their regret."""

__version__ = "0.1.0"
