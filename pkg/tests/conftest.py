import numpy as np
import pytest
from hypothesis import settings, HealthCheck

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("ci")

import ultrasemi as us
from ultrasemi import transforms as tr


FLAGSHIP_EIGS = np.array([0.0, -1.0, 1.0 + 2.0j])


@pytest.fixture(scope="session")
def W400():
    return us.make_gevrey(2.0, 400)


@pytest.fixture(scope="session")
def W2000():
    return us.make_gevrey(2.0, 2000)


@pytest.fixture(scope="session")
def P_flagship(W400):
    # N = 2000 > pmax: ratios extend through the Gevrey closed form
    return us.build(W400, 0.5, 2000)


@pytest.fixture(scope="session")
def line_flagship():
    return tr.BromwichLine(abar=1.2, height=150.0, nodes=7681)


@pytest.fixture(scope="session")
def gen_flagship():
    return us.diagonal_generator(FLAGSHIP_EIGS)


@pytest.fixture(scope="session")
def kernel_flagship(P_flagship, line_flagship):
    tg = np.linspace(0.0, 2.0, 201)
    return us.bromwich_kernel(P_flagship, line_flagship, tg, tol=1e-7)


@pytest.fixture(scope="session")
def S_flagship(gen_flagship, P_flagship, line_flagship):
    tg = np.linspace(0.0, 2.0, 201)
    return us.construct(gen_flagship, P_flagship, line_flagship, tg)


@pytest.fixture(scope="session")
def kernel_residues(W2000):
    """Residue-series oracle for the flagship kernel: K(t) = sum r_p e^{-nu_p t}.

    Poles of 1/P(-i lam) left of the line sit at lam = -m_p/L; the residue at
    the p-th pole is 1/(d/dlam P(-i lam)) there, computed in log space over
    the co-factors. Terms decay super-exponentially; 16 suffice for 1e-30.
    """
    m, L = W2000.m, 0.5
    rs = []
    for q in range(1, 17):
        lam0 = -m[q - 1] / L
        dfq = -2.0 * (L / m[q - 1]) ** 2 * lam0
        others = 1.0 - (L * lam0 / m[np.arange(len(m)) != q - 1]) ** 2
        sign = (-1.0) ** np.count_nonzero(others < 0)
        rs.append(1.0 / (dfq * sign * np.exp(np.sum(np.log(np.abs(others))))))
    rs = np.array(rs)
    nu = m[: len(rs)] / L
    return rs, nu
