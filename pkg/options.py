import os.path as path

from essentials import ConfigError

# Default config, next to this file. A run config only needs the keys it changes.
DEFAULT_CONFIG = path.join(path.dirname(path.abspath(__file__)), "config.txt")

PROBLEMS = ("cantilever2d", "mbb2d", "cantilever3d")
FILTERS = ("sensitivity", "density", "heaviside", "none")
OPTIMIZERS = ("oc", "mma")
SOLVERS = ("cg", "direct")
ASSEMBLIES = ("standard", "fast", "symbolic")
MESHES = ("quad", "tri")
SENSITIVITIES = ("analytic", "fd")


class Get:
    # "param_name":["type"] or "param_name"=["type","property_name"]
    # list types carry their item type: "list_int", "list_float"
    vars = {
        "problem": ["str"],
        "cells": ["list_int"],
        "spacing": ["list_float"],
        "mesh": ["str"],
        "load": ["float"],
        "volfrac": ["float"],
        "penal": ["float"],
        "E0": ["float"],
        "Emin": ["float"],
        "nu": ["float"],
        "rmin": ["float"],
        "filter": ["str"],
        "heaviside.beta0": ["float", "beta0"],
        "heaviside.beta_max": ["float", "beta_max"],
        "heaviside.continuation_iter": ["int", "continuation_iter"],
        "optimizer": ["str"],
        "oc.move": ["float", "oc_move"],
        "oc.eta": ["float", "oc_eta"],
        "mma.move": ["float", "mma_move"],
        "mma.a0": ["float", "mma_a0"],
        "mma.c": ["float", "mma_c"],
        "mma.d": ["float", "mma_d"],
        "max_iter": ["int"],
        "tol": ["float"],
        "solver": ["str"],
        "assembly": ["str"],
        "initial_density": ["float"],
        "output_dir": ["str"],
        "snapshot_every": ["int"],
        "sensitivity": ["str"],
        "timing": ["bool"],
        "debug_level": ["str"],
        "terminal_output": ["bool"],
        "log_file": ["str"],
    }

    # Optional default values so we don't bug if they are not in the config.
    defaults = {
        "problem": "cantilever2d",
        "cells": [160, 100],
        "spacing": None,
        "mesh": "quad",
        "load": -1.0,
        "volfrac": 0.4,
        "penal": 3.0,
        "E0": 1.0,
        "Emin": None,  # 1e-9 * E0
        "nu": 0.3,
        "rmin": 6.0,
        "filter": "sensitivity",
        "beta0": 1.0,
        "beta_max": 512.0,
        "continuation_iter": 50,
        "optimizer": "oc",
        "oc_move": 0.2,
        "oc_eta": 0.5,
        "mma_move": 0.5,
        "mma_a0": 1.0,
        "mma_c": 1e4,
        "mma_d": 0.0,
        "max_iter": 200,
        "tol": 0.01,
        "solver": "direct",
        "assembly": "fast",
        "initial_density": None,  # volfrac
        "output_dir": "output",
        "snapshot_every": 0,
        "sensitivity": "analytic",
        "timing": True,
        "debug_level": "INFO",
        "terminal_output": False,
        "log_file": "densopt.log",
    }

    def __init__(self):
        self.loaded_files = []

    def convert(self, left, right):
        """Parses one raw value according to the typed table, raises ConfigError naming the key."""
        if left not in self.vars:
            raise ConfigError(left, "unknown parameter")
        params = self.vars[left]
        kind = params[0]
        try:
            if kind == "int":
                right = int(right)
            elif kind == "float":
                right = float(right)
            elif kind.startswith("list"):
                items = [item.strip() for item in right.split(",") if item.strip()]
                if kind == "list_int":
                    right = [int(item) for item in items]
                elif kind == "list_float":
                    right = [float(item) for item in items]
                else:
                    right = items
            elif kind == "bool":
                if right.lower() in ["false", "0", "", "no"]:
                    right = False
                else:
                    right = True
            else:
                # treat as "str"
                pass
        except ValueError:
            raise ConfigError(left, f"cannot parse {right!r} as {kind}")
        if len(params) > 1:
            # deal with properties that do not match the config name.
            left = params[1]
        return left, right

    def set(self, line):
        left, right = map(str.strip, line.rstrip("\n").split("=", 1))
        name, value = self.convert(left, right)
        setattr(self, name, value)

    def load_file(self, filename):
        if not path.isfile(filename):
            raise ConfigError("config", f"file not found: {filename}")
        with open(filename) as fp:
            for line in fp:
                line = line.split("#", 1)[0]
                if "=" in line:
                    self.set(line)
        self.loaded_files.append(filename)

    def apply_defaults(self):
        for key, default in self.defaults.items():
            if key not in self.__dict__:
                setattr(self, key, default)
        if self.Emin is None:
            self.Emin = 1e-9 * self.E0
        if self.initial_density is None:
            self.initial_density = self.volfrac
        if self.spacing is None:
            self.spacing = [1.0] * len(self.cells)

    def read(self, filename=None, overrides=None):
        # first of all, load from default config so we have all needed params
        if path.exists(DEFAULT_CONFIG):
            self.load_file(DEFAULT_CONFIG)
        # then override with the run config, then with command line pairs
        if filename:
            self.load_file(filename)
        self.override(overrides or [])
        self.apply_defaults()
        self.validate()
        return self

    def override(self, pairs):
        """key=value pairs from the command line, parsed with the same table as the files."""
        for line in pairs:
            if "=" not in line:
                raise ConfigError("--set", f"expected key=value, got {line!r}")
            self.set(line)

    def validate(self):
        self._choice("problem", PROBLEMS)
        self._choice("filter", FILTERS)
        self._choice("optimizer", OPTIMIZERS)
        self._choice("solver", SOLVERS)
        self._choice("assembly", ASSEMBLIES)
        self._choice("mesh", MESHES)
        self._choice("sensitivity", SENSITIVITIES)

        dim = 3 if self.problem == "cantilever3d" else 2
        if len(self.cells) != dim:
            raise ConfigError("cells", f"{self.problem} needs {dim} cell counts, got {self.cells}")
        if any(n < 1 for n in self.cells):
            raise ConfigError("cells", f"cell counts must be positive, got {self.cells}")
        if len(self.spacing) != dim or any(h <= 0 for h in self.spacing):
            raise ConfigError("spacing", f"needs {dim} positive sizes, got {self.spacing}")
        if dim == 3 and self.mesh != "quad":
            raise ConfigError("mesh", "triangulated meshes are 2D only")
        if self.load == 0:
            raise ConfigError("load", "must be non zero")
        if not 0 < self.volfrac < 1:
            raise ConfigError("volfrac", f"must lie in (0, 1), got {self.volfrac}")
        if not 0 <= self.initial_density <= 1:
            raise ConfigError("initial_density", f"must lie in [0, 1], got {self.initial_density}")
        if self.penal < 1:
            raise ConfigError("penal", f"must be >= 1, got {self.penal}")
        if not 0 < self.Emin < self.E0:
            raise ConfigError("Emin", f"need 0 < Emin < E0, got Emin={self.Emin}, E0={self.E0}")
        if not 0 <= self.nu < 0.5:
            raise ConfigError("nu", f"must lie in [0, 0.5), got {self.nu}")
        if self.rmin <= 0:
            raise ConfigError("rmin", f"must be positive, got {self.rmin}")
        if self.beta0 < 1 or self.beta_max < self.beta0:
            raise ConfigError("heaviside.beta0", f"need 1 <= beta0 <= beta_max, got {self.beta0}, {self.beta_max}")
        if self.continuation_iter < 1:
            raise ConfigError("heaviside.continuation_iter", "must be >= 1")
        if not 0 < self.oc_move <= 1:
            raise ConfigError("oc.move", f"must lie in (0, 1], got {self.oc_move}")
        if not 0 < self.oc_eta <= 1:
            raise ConfigError("oc.eta", f"must lie in (0, 1], got {self.oc_eta}")
        if not 0 < self.mma_move <= 1:
            raise ConfigError("mma.move", f"must lie in (0, 1], got {self.mma_move}")
        if self.mma_c <= 0:
            raise ConfigError("mma.c", "must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter", "must be >= 1")
        if self.tol < 0:
            raise ConfigError("tol", f"must be >= 0, got {self.tol}")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every", "must be >= 0")

    def _choice(self, name, choices):
        value = getattr(self, name)
        if value not in choices:
            raise ConfigError(name, f"{value!r} is not one of {', '.join(choices)}")

    def echo(self):
        """key = value lines, in table order, for the run summary."""
        lines = []
        for key, params in self.vars.items():
            name = params[1] if len(params) > 1 else key
            value = getattr(self, name, None)
            if isinstance(value, list):
                value = ",".join(str(item) for item in value)
            lines.append(f"{key} = {value}")
        return lines
