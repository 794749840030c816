"""Experiment configuration: flat ``section.key`` paths, YAML files, CLI overrides."""

import hashlib
import json
import os
from dataclasses import dataclass, field, fields

import yaml

from .exceptions import ConfigError

OUTPUT_ENV = "FPKLIFT_OUTPUT_ROOT"


def default_output_root():
    return os.environ.get(OUTPUT_ENV, "runs")


@dataclass
class ExperimentConfig:
    """Every tunable of an experiment. Attribute ``section_key`` maps to the key path ``section.key``."""

    model_name: str = "ou"
    model_params: dict = field(default_factory=dict)
    model_a: list = None
    model_b: list = None
    model_sigma: list = None
    model_noise_dim: int = None

    init_mean: float = 1.0
    init_std: float = 0.5
    init_mass: float = 1.0
    init_nu_mean: float = -1.0
    init_member_means: list = field(default_factory=lambda: [1.0, -0.5, 0.25])

    family_d: int = 1
    family_depth: int = 4
    family_r0: float = 2.0
    family_n_coords: int = 32
    family_grid_steps: int = 200

    solver_n_particles: int = 10000
    solver_dt: float = 1e-3
    solver_t_final: float = 1.0
    solver_seed: int = 0
    solver_save_stride: int = 10

    ensemble_k_paths: int = 100
    ensemble_weights: list = field(default_factory=lambda: [0.5, 0.25, 0.25])

    checks_tol: float = 0.05
    checks_n_check: int = 5
    checks_i_max: int = 3
    checks_l_values: list = field(default_factory=lambda: [2, 4, 8])
    checks_battery: str = "default"

    output_dir: str = field(default_factory=default_output_root)
    runtime_threads: int = 1

    @staticmethod
    def key_of(attr):
        section, _, key = attr.partition("_")
        return f"{section}.{key}"

    @classmethod
    def attr_of(cls, key):
        attr = key.replace(".", "_", 1)
        if attr not in {f.name for f in fields(cls)} or "." not in key:
            raise ConfigError(key, "unknown configuration key")
        return attr

    def to_flat(self):
        return {self.key_of(f.name): getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_flat(cls, data):
        cfg = cls()
        cfg.update(data)
        return cfg

    def update(self, data):
        for key, value in data.items():
            setattr(self, self.attr_of(key), value)
        self.validate()
        return self

    def dumps(self):
        return yaml.safe_dump(self.to_flat(), sort_keys=True, default_flow_style=None)

    @classmethod
    def loads(cls, text):
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError("<file>", "expected a mapping of key paths to values")
        return cls.from_flat(data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def digest(self):
        """Hash of the configuration, independent of the output location and thread count."""
        flat = {k: v for k, v in self.to_flat().items() if k not in ("output.dir", "runtime.threads")}
        return hashlib.sha256(json.dumps(flat, sort_keys=True).encode()).hexdigest()

    def validate(self):
        def need(cond, key, reason):
            if not cond:
                raise ConfigError(key, reason)

        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        def is_num(v):
            return isinstance(v, (int, float)) and not isinstance(v, bool)

        need(isinstance(self.model_name, str), "model.name", "must be a preset name")
        need(isinstance(self.model_params, dict), "model.params", "must be a mapping")
        need(is_num(self.solver_dt) and self.solver_dt > 0, "solver.dt", f"must be > 0, got {self.solver_dt!r}")
        need(is_num(self.solver_t_final) and self.solver_t_final >= self.solver_dt, "solver.t_final",
             "must be >= solver.dt")
        need(is_int(self.solver_n_particles) and self.solver_n_particles >= 1, "solver.n_particles",
             "must be an integer >= 1")
        need(is_int(self.solver_seed) and self.solver_seed >= 0, "solver.seed", "must be an integer >= 0")
        need(is_int(self.solver_save_stride) and self.solver_save_stride >= 1, "solver.save_stride",
             "must be an integer >= 1")
        need(is_int(self.family_d) and self.family_d >= 1, "family.d", "must be an integer >= 1")
        need(is_int(self.family_depth) and 1 <= self.family_depth <= 8, "family.depth", "must be in 1..8")
        need(is_num(self.family_r0) and self.family_r0 > 0, "family.r0", "must be > 0")
        need(is_int(self.family_n_coords) and self.family_n_coords >= 1, "family.n_coords", "must be >= 1")
        need(is_int(self.family_grid_steps) and self.family_grid_steps >= 10, "family.grid_steps", "must be >= 10")
        need(is_num(self.init_std) and self.init_std >= 0, "init.std", "must be >= 0")
        need(is_num(self.init_mass) and 0 < self.init_mass <= 1, "init.mass", "must be in (0, 1]")
        need(is_int(self.ensemble_k_paths) and self.ensemble_k_paths >= 2, "ensemble.k_paths", "must be >= 2")
        w = self.ensemble_weights
        need(isinstance(w, list) and w and all(is_num(x) and x >= 0 for x in w)
             and abs(sum(w) - 1.0) <= 1e-12, "ensemble.weights", "must be non-negative and sum to 1")
        need(isinstance(self.init_member_means, list) and len(self.init_member_means) == len(w),
             "init.member_means", "needs one mean per ensemble weight")
        need(is_num(self.checks_tol) and self.checks_tol > 0, "checks.tol", "must be > 0")
        need(is_int(self.checks_n_check) and 1 <= self.checks_n_check <= self.family_n_coords,
             "checks.n_check", "must be in 1..family.n_coords")
        need(is_int(self.checks_i_max) and 1 <= self.checks_i_max <= self.family_n_coords,
             "checks.i_max", "must be in 1..family.n_coords")
        need(self.checks_battery in ("default", "none"), "checks.battery", "must be 'default' or 'none'")
        need(is_int(self.runtime_threads) and self.runtime_threads >= 1, "runtime.threads", "must be >= 1")
        steps = self.solver_t_final / self.solver_dt
        need(abs(steps - round(steps)) <= 1e-9 * max(steps, 1.0), "solver.dt", "must divide solver.t_final")
        need(round(steps) % self.solver_save_stride == 0, "solver.save_stride", "must divide the step count")
        return self
