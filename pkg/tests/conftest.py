import numpy as np
import pytest

from ivboot import GeneralDesign, RngStream

COSINE_DIM = 5
H0_PROJECTOR = np.diag([1.0, 1.0, 0.0, 0.0, 0.0])
THETA_FEASIBLE = np.array([0.0, 0.0, 0.4, -0.2, 0.1])


def random_cosine_design(n, gen, theta=THETA_FEASIBLE, noise_sd=np.sqrt(2.0),
                         penalty=0.0, n_instruments=1):
    """Random-regressor linear quasi-likelihood design with known population
    curvature: X uniform on (0,1), basis cos(2*pi*j*X), so E eta eta' = I/2."""
    J = theta.size
    eta = np.empty((n_instruments, n, J))
    zk = np.empty((n_instruments, n))
    for k in range(n_instruments):
        X = gen.uniform(0.0, 1.0, n)
        eta[k] = np.cos(2 * np.pi * np.outer(X, np.arange(1, J + 1)))
        zk[k] = eta[k] @ theta + noise_sd * gen.standard_normal(n)
    return GeneralDesign(eta=eta, zk=zk, penalty=penalty)


def population_fisher(n, J, penalty=0.0, n_instruments=1):
    return n_instruments * (n / 2.0) * np.eye(J) + penalty * np.eye(J)


@pytest.fixture
def gen():
    return RngStream(1234, 0).generator()
