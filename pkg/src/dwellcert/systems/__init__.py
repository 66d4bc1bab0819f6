"""Builtin switched systems. Each module holds one family of dynamics,
named after it.
"""

# NOTE: All modules containing dwellcert VectorFields must be imported here!
# A VectorField is added to the system registry only when its class
# definition is executed.
from . import linear as linear
from . import lotka_volterra as lotka_volterra
