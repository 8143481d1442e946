"""
Транспортные неравенства и затухающий градиент на пространстве путей диффузий со сносом
"""

__version__ = "1.0.0"
__author__ = "Path Transport Team"

__all__ = [
    'geometry',
    'stochastic',
    'damped_gradient',
    'transport',
    'conformal',
    'experiments',
]
