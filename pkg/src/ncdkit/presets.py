"""Named run presets: the separable-10 benchmark, the loss-subset ablation
rows, and the view-obfuscation layouts (each with a view-invariance
variant)."""

import copy

from ncdkit.config import run_config_from_dict
from ncdkit.core import ConfigError

# L=6, U=4, 16-d features, well-separated blobs: a small benchmark any
# correct joint objective should solve almost perfectly in 30 epochs.
_SEPARABLE10 = {
    "seed": 0,
    "generator": {
        "spec": {"L": 6, "U": 4, "K": 1, "feature_dim": 16, "seq_len": 1},
        "n_per_class": 200,
        "class_separation": 6.0,
        "holdout_fraction": 0.25,
    },
    "model": {"encoder_widths": [64], "embed_dim": 32, "disc_widths": [16]},
    "train": {"epochs": 30, "steps_per_epoch": 20, "learning_rate": 3e-3},
    "hyper": {},
}

_ABLATION_ROWS = {
    # row name -> (enable_cl, enable_nl, enable_H, enable_var)
    "sup": (False, False, False, False),
    "nl": (True, True, False, False),
    "var": (True, False, False, True),
    "H": (True, False, True, False),
    "nl-H": (True, True, True, False),
    "nl-var": (True, True, False, True),
    "full": (True, True, True, True),
}

_VIEW_LAYOUTS = {
    # layout -> (train_hidden_views_labeled, train_hidden_views_unlabeled)
    "lab-all-unl-single": ((), (0, 2)),
    "lab-single-unl-all": ((0, 2), ()),
    "two-views-12": ((0,), (0,)),
    "two-views-01": ((2,), (2,)),
}


def _with_ablation(base, row):
    cl, nl, h, var = _ABLATION_ROWS[row]
    cfg = copy.deepcopy(base)
    cfg["train"].update({"enable_cl": cl, "enable_nl": nl,
                         "enable_H": h, "enable_var": var})
    return cfg


def _view_base():
    cfg = copy.deepcopy(_SEPARABLE10)
    cfg["generator"]["spec"]["K"] = 3
    return cfg


def _with_view_layout(layout, vi):
    cfg = _view_base()
    hidden_l, hidden_u = _VIEW_LAYOUTS[layout]
    cfg["generator"]["train_hidden_views_labeled"] = list(hidden_l)
    cfg["generator"]["train_hidden_views_unlabeled"] = list(hidden_u)
    if vi:
        cfg["train"].update({"adversarial": "uniform", "cross_view_positives": True})
    return cfg


def ablation_row_names():
    return list(_ABLATION_ROWS)


def preset_names():
    names = ["separable-10"]
    names += [f"table2-{row}" for row in _ABLATION_ROWS]
    for layout in _VIEW_LAYOUTS:
        names += [f"view-{layout}", f"view-{layout}-vi"]
    return names


def preset_dict(name: str, seed=None) -> dict:
    """Raw (unmaterialized) config dict for a named preset."""
    if name == "separable-10":
        cfg = copy.deepcopy(_SEPARABLE10)
    elif name.startswith("table2-") and name[7:] in _ABLATION_ROWS:
        cfg = _with_ablation(_SEPARABLE10, name[7:])
    elif name.startswith("view-"):
        rest = name[5:]
        vi = rest.endswith("-vi")
        layout = rest[:-3] if vi else rest
        if layout not in _VIEW_LAYOUTS:
            raise ConfigError(f"unknown preset {name!r}; known: {', '.join(preset_names())}")
        cfg = _with_view_layout(layout, vi)
    else:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(preset_names())}")
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def make_preset(name: str, seed=None):
    """RunConfig for a named preset."""
    return run_config_from_dict(preset_dict(name, seed))
