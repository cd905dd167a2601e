"""Fast in-process invariant checks for the ``selftest`` subcommand."""

import logging
from typing import Callable, List, Tuple

import numpy as np

from src.core.linalg import as_matrix, as_vector, matvec
from src.core.rng import RandomStream
from src.core.stats import quantile, softmax, topk_indices
from src.moe.model import model_forward
from src.noise.model import quantization_step
from src.noise.specs import AdcSpec, NoiseConfig
from src.profiler.activation import ActivationMap
from src.profiler.balance import balance_report
from src.romer.calibration import adjust_logits, calibrate_logits, contraction_holds
from src.romer.plan import LayerPlan, build_replacement_plan
from .experiment_config import ModelSpec
from .generators import generate_model

logger = logging.getLogger(__name__)


def _close(a, b, tol: float = 1e-12) -> bool:
    return bool(np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=tol, atol=tol))


def check_softmax() -> bool:
    return _close(softmax([np.log(1), np.log(2), np.log(3)]), [1 / 6, 2 / 6, 3 / 6]) and _close(
        softmax([1000.0, 1000.0, 1000.0]), [1 / 3] * 3
    )


def check_quantile() -> bool:
    z = [0.0, 1.0, 9.0, 10.0]
    return _close(quantile(z, 0.25), 0.75) and _close(quantile(z, 0.75), 9.25)


def check_topk() -> bool:
    return topk_indices([0.1, 0.9, 0.5], 2) == [1, 2] and topk_indices([3, 3, 1], 1) == [0]


def check_matvec() -> bool:
    return _close(matvec(as_matrix([[1, 2], [3, 4]]), as_vector([1, 1])), [3, 7])


def check_quantization_step() -> bool:
    return quantization_step(AdcSpec(v_ref=255.0, bits=8)) == 1.0


def check_calibration() -> bool:
    out = calibrate_logits(np.array([10.0, 0.0, 9.0, 1.0]), 0.1)
    return _close(out, [9.15, 0.85, 8.15, 1.85])


def check_contraction() -> bool:
    return contraction_holds(np.array([0.1, 10.2, 0.5, 10.9]), 0.4)


def check_adjust() -> bool:
    plan = LayerPlan((0,), (3,))
    return _close(adjust_logits(np.array([2.0, 0.5, 1.0, 0.3]), plan, "literal-zero"), [1, 0.5, 1, 0])


def check_plan() -> bool:
    amap = ActivationMap(np.array([[5.0, 1.0, 4.0, 2.0]]), np.zeros((1, 4), dtype=np.int64), 1)
    lp = build_replacement_plan(amap, 2).layers[0]
    return lp.top == (0, 2) and lp.bottom == (1, 3)


def check_balance() -> bool:
    amap = ActivationMap(np.array([[2.0, 1.0, 1.0, 0.0]]), np.zeros((1, 4), dtype=np.int64), 1)
    report = balance_report(amap, tau=0.5)
    return _close(report.entropy[0], 0.75) and report.underactivated_fraction[0] == 0.25


def check_rng_reproducible() -> bool:
    a, b = RandomStream(42, 3), RandomStream(42, 3)
    return np.array_equal(a.normal(size=64), b.normal(size=64)) and np.array_equal(
        a.uniform(size=64), b.uniform(size=64)
    )


def check_clean_determinism() -> bool:
    spec = ModelSpec(num_layers=2, num_experts=8, k=2, hidden_dim=8, inner_dim=8, clusters=3)
    model = generate_model(spec)
    tokens = [np.eye(8)[i] for i in range(4)]
    out_a, _ = model_forward(model, tokens, NoiseConfig.disabled(), 0)
    out_b, _ = model_forward(model, tokens, NoiseConfig.disabled(), 99)
    return all(np.array_equal(x, y) for x, y in zip(out_a, out_b))


CHECKS: List[Tuple[str, Callable[[], bool]]] = [
    ("softmax", check_softmax),
    ("quantile", check_quantile),
    ("topk", check_topk),
    ("matvec", check_matvec),
    ("quantization_step", check_quantization_step),
    ("calibrate_logits", check_calibration),
    ("iqr_contraction", check_contraction),
    ("adjust_logits", check_adjust),
    ("replacement_plan", check_plan),
    ("balance_report", check_balance),
    ("rng_reproducible", check_rng_reproducible),
    ("clean_determinism", check_clean_determinism),
]


def run_selftest() -> List[Tuple[str, bool, str]]:
    """Run every check; returns (name, passed, detail)."""
    results = []
    for name, check in CHECKS:
        try:
            ok = bool(check())
            detail = "" if ok else "check returned False"
        except Exception as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        if ok:
            logger.debug(f"selftest {name}: ok")
        else:
            logger.error(f"selftest {name} failed: {detail}")
        results.append((name, ok, detail))
    return results
