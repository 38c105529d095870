import pytest

from vldp import FunctionSpec, KernelSpec, ModelSpec


def rough_cir(rho=-0.5, H=0.3, sigma0=0.3, beta=0.25, v0=0.04, T=1.0):
    """Drift-less CIR driver, fractional kernel, sigma0 (1 + x^beta)."""
    return ModelSpec(KernelSpec("fractional", {"H": H}), FunctionSpec("u", "identity"),
                     FunctionSpec("sigma", "shifted-power", {"sigma0": sigma0, "beta": beta}),
                     FunctionSpec("drift", "zero"), FunctionSpec("disp", "sqrt"), v0, rho, T)


def brownian_square(sigma0=1.0, rho=0.5, T=1.0):
    """Brownian driver from zero, U(x) = x^2, unit kernel, sigma0 (1 + x)."""
    return ModelSpec(KernelSpec("constant", {"level": 1.0}), FunctionSpec("u", "square"),
                     FunctionSpec("sigma", "affine", {"sigma0": sigma0, "slope": 1.0}),
                     FunctionSpec("drift", "zero"), FunctionSpec("disp", "constant"), 0.0, rho, T)


def flat_vol(sigma0=0.2, rho=0.3, T=1.0, H=0.1):
    """Constant sigma on top of a mean-reverting rough driver (the driver is irrelevant)."""
    return ModelSpec(KernelSpec("fractional", {"H": H}), FunctionSpec("u", "identity"),
                     FunctionSpec("sigma", "constant", {"sigma0": sigma0}),
                     FunctionSpec("drift", "mean-reverting", {"kappa": 2.0, "theta": 0.04}),
                     FunctionSpec("disp", "sqrt"), 0.04, rho, T)


def heston_like(rho=-0.7, T=1.0):
    """Classical CIR driver with drift; sigma(x) = sqrt-free affine vol."""
    return ModelSpec(KernelSpec("exponential", {"lambda": 1.5, "level": 1.0}), FunctionSpec("u", "identity"),
                     FunctionSpec("sigma", "affine", {"sigma0": 0.2, "slope": 2.0}),
                     FunctionSpec("drift", "mean-reverting", {"kappa": 1.5, "theta": 0.04}),
                     FunctionSpec("disp", "sqrt"), 0.04, rho, T)


@pytest.fixture
def rough_spec():
    return rough_cir()


@pytest.fixture
def square_spec():
    return brownian_square()


@pytest.fixture
def flat_spec():
    return flat_vol()


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Records one verdict line per acceptance criterion for the end-of-run summary."""
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append((number, f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
