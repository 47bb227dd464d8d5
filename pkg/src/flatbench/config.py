"""Engine configuration: perception, simulator, and camera settings in one place."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import gabor, policy
from .imaging import HsvBounds
from .sim import BG_GRAY, CLOTH_GREEN, SimParams, TopDownCamera

# green cloth against the gray table
DEFAULT_HSV = HsvBounds(h_lo=80.0, h_hi=160.0, s_lo=0.2, s_hi=1.0, v_lo=0.1, v_hi=1.0)


@dataclass
class BankConfig:
    """Orientation bank settings; ksize None derives the odd size from sigma."""

    n_orient: int = gabor.DEFAULT_N_ORIENT
    wavelength: float = gabor.DEFAULT_WAVELENGTH
    sigma: float = gabor.DEFAULT_SIGMA
    gamma: float = gabor.DEFAULT_GAMMA
    ksize: int | None = None

    def build(self) -> gabor.FilterBank:
        return gabor.build_bank(n_orient=self.n_orient, wavelength=self.wavelength,
                                sigma=self.sigma, gamma=self.gamma, ksize=self.ksize)

    def to_dict(self) -> dict:
        return {"n_orient": self.n_orient, "wavelength": self.wavelength,
                "sigma": self.sigma, "gamma": self.gamma, "ksize": self.ksize}

    @classmethod
    def from_dict(cls, d: dict) -> "BankConfig":
        return cls(**d)


@dataclass
class EngineConfig:
    """Everything an episode needs: segmentation, scoring, cloth, and view."""

    hsv: HsvBounds = field(default_factory=lambda: DEFAULT_HSV)
    grid_rows: int = 9
    grid_cols: int = 9
    bank: BankConfig = field(default_factory=BankConfig)
    min_cloth_fraction: float = gabor.DEFAULT_MIN_CLOTH_FRACTION
    flat_epsilon: float = policy.DEFAULT_FLAT_EPSILON
    corner_eps_frac: float = 0.02
    sim: SimParams = field(default_factory=SimParams)
    camera: TopDownCamera = field(default_factory=TopDownCamera)
    cloth_nx: int = 41
    cloth_ny: int = 41
    rest_len: float = 0.01
    cloth_color: tuple = CLOTH_GREEN
    bg_color: tuple = BG_GRAY

    def to_dict(self) -> dict:
        return {
            "hsv": self.hsv.to_dict(),
            "grid_rows": self.grid_rows,
            "grid_cols": self.grid_cols,
            "bank": self.bank.to_dict(),
            "min_cloth_fraction": self.min_cloth_fraction,
            "flat_epsilon": self.flat_epsilon,
            "corner_eps_frac": self.corner_eps_frac,
            "sim": self.sim.to_dict(),
            "camera": self.camera.to_dict(),
            "cloth_nx": self.cloth_nx,
            "cloth_ny": self.cloth_ny,
            "rest_len": self.rest_len,
            "cloth_color": list(self.cloth_color),
            "bg_color": list(self.bg_color),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        kw = dict(d)
        if "hsv" in kw:
            kw["hsv"] = HsvBounds.from_dict(kw["hsv"])
        if "bank" in kw:
            kw["bank"] = BankConfig.from_dict(kw["bank"])
        if "sim" in kw:
            kw["sim"] = SimParams.from_dict(kw["sim"])
        if "camera" in kw:
            kw["camera"] = TopDownCamera.from_dict(kw["camera"])
        if "cloth_color" in kw:
            kw["cloth_color"] = tuple(kw["cloth_color"])
        if "bg_color" in kw:
            kw["bg_color"] = tuple(kw["bg_color"])
        return cls(**kw)


def load_config(path) -> EngineConfig:
    with open(path) as f:
        return EngineConfig.from_dict(json.load(f))


def save_config(path, cfg: EngineConfig) -> None:
    with open(path, "w") as f:
        json.dump(cfg.to_dict(), f, indent=2)
        f.write("\n")
