"""Flat ``key = value`` configuration files for :class:`ModelSpec`.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Unknown keys are rejected.
"""
from pathlib import Path

from .errors import ConfigError
from .kernel import KERNEL_FAMILIES, KernelSpec
from .model import FAMILIES, FunctionSpec, ModelSpec

_ROLE_FIELD = {"u": "u_fn", "sigma": "sigma_fn", "drift": "drift_fn", "disp": "disp_fn"}
_ROLE_ORDER = ("u", "sigma", "drift", "disp")
_SCALARS = {"v0": "v0", "rho": "rho", "T": "horizon"}


def allowed_keys():
    keys = {"kernel.type"} | {f"kernel.{p}" for names in KERNEL_FAMILIES.values() for p in names}
    for role, fams in FAMILIES.items():
        keys.add(f"{role}.family")
        keys |= {f"{role}.{p}" for names, _ in fams.values() for p in names}
    return keys | set(_SCALARS)


def _number(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def parse_config(text: str) -> ModelSpec:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    unknown = set(raw) - allowed_keys()
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")

    def take(prefix, family_key):
        if family_key not in raw:
            raise ConfigError(f"missing required key {family_key!r}")
        params = {k.split(".", 1)[1]: _number(k, v) for k, v in raw.items()
                  if k.startswith(prefix + ".") and k != family_key}
        return raw[family_key], params

    fam, params = take("kernel", "kernel.type")
    stray = set(params) - set(KERNEL_FAMILIES.get(fam, ()))
    if fam in KERNEL_FAMILIES and stray:
        raise ConfigError(f"kernel {fam!r} does not use key(s) {sorted('kernel.' + s for s in stray)}")
    kernel = KernelSpec(fam, params)

    for key in _SCALARS:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    scalars = {field: _number(key, raw[key]) for key, field in _SCALARS.items()}

    fns = {}
    for role in _ROLE_ORDER:
        fam, params = take(role, f"{role}.family")
        if fam in FAMILIES[role]:
            names = FAMILIES[role][fam][0]
            stray = set(params) - set(names)
            if stray:
                raise ConfigError(f"{role} family {fam!r} does not use key(s) "
                                  f"{sorted(role + '.' + s for s in stray)}")
            if role == "u" and fam == "power" and "center" not in params:
                params["center"] = scalars["v0"]
        fns[_ROLE_FIELD[role]] = FunctionSpec(role, fam, params)
    return ModelSpec(kernel=kernel, **fns, **scalars)


def load_config(path) -> ModelSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(spec: ModelSpec) -> str:
    lines = [f"kernel.type = {spec.kernel.family}"]
    lines += [f"kernel.{k} = {v!r}" for k, v in spec.kernel.params.items()]
    for role in _ROLE_ORDER:
        fn = getattr(spec, _ROLE_FIELD[role])
        lines.append(f"{role}.family = {fn.family}")
        lines += [f"{role}.{k} = {v!r}" for k, v in fn.params.items()]
    lines += [f"v0 = {spec.v0!r}", f"rho = {spec.rho!r}", f"T = {spec.horizon!r}"]
    return "\n".join(lines) + "\n"


def config_dict(spec: ModelSpec) -> dict:
    """Flat mapping of the config keys, for manifests."""
    out = {}
    for line in dump_config(spec).splitlines():
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out
