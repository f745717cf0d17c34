"""Central finite-difference checks of every analytic gradient.

Relative error of a component is ``|analytic - numeric| / max(|analytic|,
|numeric|, REL_FLOOR)``. The floor keeps near-zero components, where the
difference quotient is dominated by rounding (about ``1e-16 * loss / step``),
from reporting meaningless ratios.
"""

from dataclasses import dataclass

import numpy as np

from fixhead import head as hmod
from fixhead import net
from fixhead.numerics import Rng, derive_seed

STEP = 1e-6
REL_FLOOR = 1e-4

CASES = (
    ("learned", "ce"),
    ("orthonormal", "ce"),
    ("hadamard", "ce"),
    ("orthonormal", "cosine"),
    ("hadamard", "cosine"),
)


def rel_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom, initial=0.0))


def numeric_grad(f, arr, step=STEP):
    """Central differences of scalar ``f()`` with respect to every entry of ``arr``."""
    g = np.zeros(arr.shape)
    flat = arr.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        up = f()
        flat[i] = old - step
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * step)
    return g


def numeric_alpha_grad(f, head, step=STEP):
    old = head.alpha
    head.alpha = old + step
    up = f()
    head.alpha = old - step
    down = f()
    head.alpha = old
    return (up - down) / (2 * step)


def model_loss(mlp, z, t):
    x, y = net.forward(mlp, z)
    mlp._cache = None
    if mlp.loss == "ce":
        return hmod.nll_loss(y, t)
    return hmod.cosine_loss_and_grads(mlp.head, x, t, mlp.cosine_reduction)[0]


@dataclass
class GradCheckResult:
    mode: str
    loss: str
    widths: list
    n_classes: int
    errors: dict  # parameter name -> max relative error

    @property
    def max_error(self):
        return max(self.errors.values())


def random_case(mode, loss, seed):
    """A small random MLP + head + batch; shapes vary with the seed."""
    rng = Rng(seed)
    n_in = 2 + rng.below(5)
    hidden = [2 + rng.below(9) for _ in range(rng.below(2) + 1)]
    n_feat = 3 + rng.below(8)
    n_classes = 2 + rng.below(5)
    if mode == "orthonormal" and loss == "ce" and rng.below(4) == 0:
        n_classes = n_feat + 1 + rng.below(3)  # exercise the C > N unit-rows regime
    widths = [n_in, *hidden, n_feat]
    head = hmod.make_head(mode, n_feat, n_classes, seed=derive_seed(seed, 1),
                          alpha=0.5 + 3.0 * rng.uniform(1)[0])
    mlp = net.Mlp.build(widths, head, loss=loss)
    net.init_params(mlp, derive_seed(seed, 2))
    for layer in mlp.layers:
        layer.b[...] = 0.1 * rng.normal(layer.b.size)
    head.bias[...] = 0.5 * rng.normal(n_classes)
    if mode != "learned":
        head.alpha = 0.5 + 3.0 * rng.uniform(1)[0]
    batch = 1 + rng.below(3)
    z = rng.normal(batch * n_in).reshape(batch, n_in)
    t = np.array([rng.below(n_classes) for _ in range(batch)])
    if batch == 1 and rng.below(2):
        z, t = z[0], int(t[0])
    return mlp, z, t


def check_case(mlp, z, t, step=STEP):
    """Compare backprop against central differences for every trainable parameter."""
    net.forward(mlp, z)
    net.backward(mlp, t)
    errors = {}

    def f():
        return model_loss(mlp, z, t)

    for name, param, grad in net.parameters(mlp):
        errors[name] = rel_error(grad, numeric_grad(f, param, step))
    if mlp.head.fixed and mlp.loss == "ce":
        errors["head.alpha"] = rel_error(mlp.grad_alpha, numeric_alpha_grad(f, mlp.head, step))
    return errors


def check_head_input(head, x, t, loss="ce", step=STEP):
    """Relative error of the head's ``d_input`` (and ``d_alpha``/``d_bias``)."""
    x = np.array(x, dtype=np.float64)
    if loss == "ce":
        _, g = hmod.loss_and_grads(head, x, t)

        def f():
            return hmod.loss_and_grads(head, x, t)[0]

        errors = {
            "d_input": rel_error(g.d_input, numeric_grad(f, x, step)),
            "d_bias": rel_error(g.d_bias, numeric_grad(f, head.bias, step)),
        }
        if head.fixed:
            errors["d_alpha"] = rel_error(g.d_alpha, numeric_alpha_grad(f, head, step))
        else:
            errors["d_weights"] = rel_error(g.d_weights, numeric_grad(f, head.weights, step))
        return errors
    _, d_input = hmod.cosine_loss_and_grads(head, x, t)

    def f():
        return hmod.cosine_loss_and_grads(head, x, t)[0]

    return {"d_input": rel_error(d_input, numeric_grad(f, x, step))}


def run_suite(seed=0, per_case=20):
    """``per_case`` random configurations for every (head mode, loss) pair."""
    results = []
    for ci, (mode, loss) in enumerate(CASES):
        for k in range(per_case):
            case_seed = derive_seed(seed, ci, k)
            mlp, z, t = random_case(mode, loss, case_seed)
            errors = check_case(mlp, z, t)
            # head-level check on a fresh random representation
            rng = Rng(derive_seed(case_seed, 3))
            rep = rng.normal(mlp.head.n_features)
            head_errors = check_head_input(mlp.head, rep, rng.below(mlp.head.n_classes), loss)
            errors.update({f"head.{name}": v for name, v in head_errors.items()})
            results.append(GradCheckResult(mode, loss, mlp.widths, mlp.head.n_classes, errors))
    return results
