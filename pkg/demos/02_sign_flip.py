"""An instrument can miss a nonzero response entirely.

When the instrument moves the two shocks with opposite-signed weights, the
weighted average can cancel. Here both underlying responses are positive,
yet the LP-IV estimand is exactly zero.
"""

import numpy as np

from compshock import (
    InstrumentSpec,
    SvmaModel,
    alpha,
    lpiv_estimand,
    lpiv_weights,
    same_sign_holds,
    true_irf,
)

model = SvmaModel(np.array([[[1.0, 1.0, 0.0], [1.0, 2.0, 1.0]]]), S=2)
spec = InstrumentSpec([2.0, -1.0, 0.0])

a = alpha(model, spec)
print("responses of y:  ", [true_irf(model, 0, 1, s) for s in (0, 1)])
print("alpha:           ", a.values)
print("weights:         ", lpiv_weights(a).values)
print("same-sign holds: ", same_sign_holds(a))
print("LP-IV estimand:  ", lpiv_estimand(model, spec, 0))
