"""Closed-form calculators for the network-class constants and the risk rate.

All logarithms are natural unless the name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields


def _check_positive(**values) -> None:
    for name, v in values.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be a positive finite number, got {v!r}")


def lipschitz_constant(W: float, L: int, B: float) -> float:
    """Parameter-perturbation constant of a depth-``L`` ReLU class with weights in ``[-B, B]``.

    ``(WB)^L (L/B + L/(WB-1)) - ((WB)^L - 1)/(WB-1)^2``; the ``WB = 1`` case is a
    removable singularity of the formula but is rejected rather than patched.
    """
    _check_positive(W=W, L=L, B=B)
    if W < 1 or L < 1:
        raise ValueError("need W >= 1 and L >= 1")
    wb = W * B
    if wb == 1:
        raise ValueError("W*B == 1 makes the constant's denominator vanish")
    g = wb**L
    return g * (L / B + L / (wb - 1)) - (g - 1) / (wb - 1) ** 2


def depth_constant(L_user: int, L_item: int) -> float:
    return 28.0 * max(L_user, L_item)


def scale_constant(p: int, M: float, B_user: float, B_item: float) -> float:
    return 2.0 * p**1.5 * M * max(B_user, B_item)


def approx_bound(p: int, M: float, eps: float) -> float:
    """Sup-norm gap to the true score function achievable at resolution ``eps``: ``3 p M eps``."""
    _check_positive(p=p, M=M, eps=eps)
    return 3.0 * p * M * eps


@dataclass(frozen=True)
class WidthSchedule:
    width_user: float
    width_item: float
    scale_user: float | None  # order of the parameter bound, only if s is given
    scale_item: float | None


def width_schedule(eps: float, beta: float, d_u: float, d_i: float, s: float | None = None) -> WidthSchedule:
    """Orders of magnitude only: ``eps^(-d/beta)`` widths, ``eps^(-s)`` parameter bounds."""
    _check_positive(eps=eps, beta=beta, d_u=d_u, d_i=d_i)
    scale = None if s is None else eps ** (-s)
    return WidthSchedule(eps ** (-d_u / beta), eps ** (-d_i / beta), scale, scale)


@dataclass(frozen=True)
class BoundInputs:
    W: float
    L: int
    B: float
    W_item: float
    L_item: int
    B_item: float
    p: int
    M: float
    beta: float
    d_u: float
    d_i: float
    omega_size: int
    sigma2: float = 0.1
    B_e: float = 1.0
    lambda_omega: float = 0.0
    J_R0: float = 0.0
    eps: float = 0.01

    def __post_init__(self):
        _check_positive(
            W=self.W, L=self.L, B=self.B, W_item=self.W_item, L_item=self.L_item, B_item=self.B_item,
            p=self.p, M=self.M, beta=self.beta, d_u=self.d_u, d_i=self.d_i, eps=self.eps,
        )
        if self.omega_size < 2:
            raise ValueError("omega_size must be >= 2 so that log|omega| > 0")
        for name in ("sigma2", "B_e", "lambda_omega", "J_R0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative")

    @property
    def d_ui(self) -> float:
        return max(self.d_u, self.d_i)

    @property
    def L_ui(self) -> int:
        return max(self.L, self.L_item)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> BoundInputs:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown BoundInputs fields: {sorted(unknown)}")
        return cls(**doc)


def entropy_bound(inputs: BoundInputs, eps: float) -> float:
    """Upper bound on the log bracketing number of the two-tower score class at ``eps``."""
    _check_positive(eps=eps)
    c_user = lipschitz_constant(inputs.W, inputs.L, inputs.B)
    c_item = lipschitz_constant(inputs.W_item, inputs.L_item, inputs.B_item)
    c2 = depth_constant(inputs.L, inputs.L_item)
    c3 = scale_constant(inputs.p, inputs.M, inputs.B, inputs.B_item)
    arg = c3 * (c_user + c_item) / eps
    if arg <= 1:
        # the bound would be zero or negative, which is meaningless for a log covering number
        raise ValueError(
            f"log argument {arg:.6g} <= 1: eps={eps:g} is too large for these constants"
        )
    width_term = inputs.W * math.log(inputs.W) + inputs.W_item * math.log(inputs.W_item)
    return c2 * width_term * math.log(arg)


def rate_exponent(beta: float, d_ui: float) -> float:
    _check_positive(beta=beta, d_ui=d_ui)
    return 2.0 * beta / (2.0 * beta + d_ui)


def noise_constant(p: int, M: float, sigma2: float, B_e: float) -> float:
    pm = p * p * M**4
    return 6.0 * max(50.0 * pm + 4.0 * sigma2, 1.0) * (25.0 * pm + B_e**2) / 13.0


@dataclass(frozen=True)
class BoundReport:
    inputs: BoundInputs
    lipschitz_C: float
    lipschitz_C_tilde: float
    C1: float
    C2: float
    C3: float
    approx_bound: float
    entropy_at_eps: float | None  # None when eps is too large for the log argument
    rate_exponent: float
    rate_at_omega: float
    lambda_condition_holds: bool
    width_order: float
    depth_order_user: float
    depth_order_item: float

    def entropy_bound(self, eps: float) -> float:
        return entropy_bound(self.inputs, eps)

    def rate_value(self, omega: float) -> float:
        """``L_ui |omega|^(-exponent) (log |omega|)^2``."""
        return self.inputs.L_ui * omega ** (-self.rate_exponent) * math.log(omega) ** 2

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "inputs"}
        out["inputs"] = self.inputs.to_dict()
        return out


def _depth_order(beta: float, d: float) -> float:
    return beta * math.log2(beta) / d


def rate_report(inputs: BoundInputs) -> BoundReport:
    exp = rate_exponent(inputs.beta, inputs.d_ui)
    n = inputs.omega_size
    log_n = math.log(n)
    try:
        ent = entropy_bound(inputs, inputs.eps)
    except ValueError:
        ent = None
    threshold = inputs.L_ui * n ** (-exp) * log_n
    report = BoundReport(
        inputs=inputs,
        lipschitz_C=lipschitz_constant(inputs.W, inputs.L, inputs.B),
        lipschitz_C_tilde=lipschitz_constant(inputs.W_item, inputs.L_item, inputs.B_item),
        C1=noise_constant(inputs.p, inputs.M, inputs.sigma2, inputs.B_e),
        C2=depth_constant(inputs.L, inputs.L_item),
        C3=scale_constant(inputs.p, inputs.M, inputs.B, inputs.B_item),
        approx_bound=approx_bound(inputs.p, inputs.M, inputs.eps),
        entropy_at_eps=ent,
        rate_exponent=exp,
        rate_at_omega=inputs.L_ui * n ** (-exp) * log_n**2,
        lambda_condition_holds=bool(4.0 * inputs.lambda_omega * inputs.J_R0 <= threshold),
        width_order=n ** (inputs.d_ui / (2.0 * inputs.beta + inputs.d_ui)) * log_n,
        depth_order_user=_depth_order(inputs.beta, inputs.d_u),
        depth_order_item=_depth_order(inputs.beta, inputs.d_i),
    )
    values = [v for k, v in report.to_dict().items() if isinstance(v, float)]
    if not all(math.isfinite(v) for v in values):
        raise OverflowError("a reported constant overflowed; reduce W, L or B")
    return report
