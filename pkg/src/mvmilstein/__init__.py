"""mvmilstein - tamed Milstein schemes for McKean-Vlasov particle systems."""

__version__ = "0.1.0"
__author__ = "Your Team"
