"""Named line configurations used by the analyses and their tests."""
from dataclasses import replace

from .config import (BufferSpec, DeviationSpec, DriftSpec, HoldSpec, LineConfig,
                     ObjectLayerConfig, Operator, ReworkSpec, Section, apply_injection)


def baseline() -> LineConfig:
    return LineConfig.default()


def skip_window(station="SA4", cars=27, base=None) -> LineConfig:
    """``station`` is skipped for exactly the first ``cars`` cars."""
    cfg = base or baseline()
    cfg = apply_injection(cfg, DeviationSpec(station, 1.0, 0))
    return apply_injection(cfg, DeviationSpec(station, 0.0, cars))


def drift(steps=(("GA4", 350), ("GA5", 600)), scale=1.5, base=None) -> LineConfig:
    cfg = base or baseline()
    for station, onset in steps:
        cfg = apply_injection(cfg, DriftSpec(station, onset, scale))
    return cfg


def two_factory(base=None, fast=("GF03", "GF08"), speed=2.5, gain=1.0):
    """(Dutch, Belgian) plants sharing one topology.

    In the Dutch plant a few front-section operators work at ``speed`` and
    favour GA4; the work they skip there resurfaces at GA5 (rework).  The
    Belgian plant has uniform operators and no rework coupling.
    """
    cfg = base or baseline()
    ops = dict(cfg.operators)
    for o in fast:
        ops[o] = Operator(o, speed, {"GA4": 2.0, "GA5": 0.05})
    nl = replace(cfg, operators=ops, rework=(ReworkSpec("GA4", "GA5", gain),),
                 car_attrs={**cfg.car_attrs, "city": {"Amsterdam": 3, "Rotterdam": 2}}).validate()
    be = replace(cfg, car_attrs={**cfg.car_attrs, "city": {"Brussels": 3, "Antwerp": 2}}).validate()
    return nl, be


def saturated(base=None, arrival_mean=20.0, sa7=(32.0, 0.6)) -> LineConfig:
    """Arrivals outpace the line and the door station SA7 is the slowest,
    most variable step; the setting in which a door buffer matters."""
    cfg = base or baseline()
    service = dict(cfg.service)
    service["SA7"] = sa7
    return replace(cfg, service=service,
                   arrival={"kind": "lognormal", "mean": arrival_mean, "sigma": 0.1}).validate()


def with_buffer(cfg, station="SA7", capacity=3) -> LineConfig:
    return apply_injection(cfg, BufferSpec(station, capacity))


def batch_delay(probability=0.2, minutes=1080.0, station="GA25", base=None) -> LineConfig:
    """A share of the cars is parked off-line near the line end."""
    return apply_injection(base or baseline(), HoldSpec(station, probability, minutes))


def single_order(products=10, base=None) -> LineConfig:
    """Object layer where every order comprises ``products`` products."""
    cfg = base or baseline()
    layer = replace(cfg.object_layer, products_per_order={products: 1.0})
    return replace(cfg, object_layer=layer).validate()


def short_line(n_ga=15, sa_mean=25.0, sa_sigma=0.9, ga_mean=4.0) -> LineConfig:
    """A front-of-line excerpt: GA0..GA14 with a single part station SA1
    consumed at the last station.  Short, even GA steps and a widely
    dispersed SA1 let the part finish at any point of the line."""
    ga = tuple(f"GA{i}" for i in range(n_ga))
    service = {g: (ga_mean, 0.3) for g in ga}
    service["SA1"] = (sa_mean, sa_sigma)
    ga_ops = tuple(f"G{i:02d}" for i in range(1, n_ga + 3))
    sa_ops = ("S01", "S02", "S03")
    ops = {o: Operator(o) for o in ga_ops + sa_ops}
    return LineConfig(
        ga_stations=ga, sa_chains=(("SA1",),), prerequisites={ga[-1]: ("SA1",)},
        service=service,
        sections=(Section("GA", ga, ga_ops), Section("SA", ("SA1",), sa_ops)),
        operators=ops, arrival={"kind": "lognormal", "mean": 120.0, "sigma": 0.1},
        car_attrs={"color": {"white": 1}},
        object_layer=ObjectLayerConfig(component_stations=ga[:3]),
    ).validate()
