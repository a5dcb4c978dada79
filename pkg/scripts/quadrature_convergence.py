"""Error of composite Gauss-Legendre integration as the panel count grows.

Integrates an algebra-valued trig integrand on [0,1]^2 against a fine
reference rule and reports the observed order per refinement.
"""

import argparse
from dataclasses import dataclass, field

import numpy as np

from opvg import exprdsl as ex
from opvg.algebra import AElem
from opvg.integrate import BoxDomain, Quadrature, pettis_integral


@dataclass
class ConvergenceConfig:
    integrand: str = "c*exp(sin(3*u)*cos(2*v)) + u^2*v"
    orders: tuple[int, ...] = (2, 4, 8)
    panels: tuple[int, ...] = (1, 2, 4, 8, 16)
    constants: dict = field(default_factory=lambda: {"c": AElem([1.0, -2.0 + 0.5j])})


def run(cfg: ConvergenceConfig) -> list[tuple[int, int, float]]:
    f = ex.parse(cfg.integrand, ("u", "v"), cfg.constants)
    dom = BoxDomain(((0.0, 1.0), (0.0, 1.0)))
    ref = pettis_integral(f, dom, Quadrature(24, 32), cfg.constants).values
    out = []
    for m in cfg.orders:
        for s in cfg.panels:
            err = float(np.max(np.abs(pettis_integral(f, dom, Quadrature(m, s), cfg.constants).values - ref)))
            out.append((m, s, err))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--integrand", default=ConvergenceConfig.integrand)
    cfg = ConvergenceConfig(integrand=ap.parse_args().integrand)
    rows = run(cfg)
    print(f"{'m':>3} {'s':>4} {'max error':>12} {'order':>7}")
    prev = {}
    for m, s, err in rows:
        order = ""
        if m in prev and prev[m] > 1e-14 and err > 1e-14:
            order = f"{np.log2(prev[m] / err):7.2f}"
        print(f"{m:>3} {s:>4} {err:>12.3e} {order:>7}")
        prev[m] = err


if __name__ == "__main__":
    main()
