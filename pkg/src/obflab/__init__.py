"""obflab: a desk-scale laboratory for breaking quantum obfuscation.

The package builds, end to end, the counterexample machinery showing that
virtual-black-box obfuscation of classical circuits by quantum states
cannot exist: a homomorphic-evaluation attack distinguishes obfuscated
point functions from the all-zero function with near-certain advantage,
while query-bounded black-box simulators provably (and here, measurably)
cannot.  Everything runs at toy parameters on one desk.
"""

__version__ = "0.1.0"
