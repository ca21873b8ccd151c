__title__ = "greybox-gp"
__description__ = "Physics-informed Gaussian process regression, from white-box to black-box."
__version__ = "0.1a1"
