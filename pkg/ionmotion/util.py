import math

import numpy as np


def selective_merge(base_obj, delta_obj):
    """
    Recursively merge dict delta_obj into base_obj by adding all key/value
    pairs which don't exist in base_obj yet.

    Used to fill a user config with the entries of DEFAULT_CONFIG: user values
    win, missing sections and keys are copied from the defaults.
    """
    if not isinstance(base_obj, dict):
        return base_obj
    if not isinstance(delta_obj, dict):
        return base_obj

    delta_keys = set(delta_obj)
    base_keys = set(base_obj)
    common_keys = base_keys & delta_keys
    new_keys = delta_keys - common_keys
    base_keys_to_copy = base_keys - common_keys

    return {
        **{k: base_obj[k] for k in base_keys_to_copy},
        **{
            k: selective_merge(base_obj[k], delta_obj[k])
            for k in common_keys
        },
        # deep copies of nested default dicts and lists
        **{
            k: selective_merge(dict(), delta_obj[k])
            if isinstance(delta_obj[k], dict)
            else (list(delta_obj[k]) if isinstance(delta_obj[k], list) else delta_obj[k])
            for k in new_keys
        },
    }


def unknown_keys(template: dict, target: dict, prefix=""):
    """
    Return the dotted names of all keys in target (recursively) which have no
    counterpart in template
    """
    found = []
    for key, value in target.items():
        dotted = f"{prefix}{key}"
        if key not in template:
            found.append(dotted)
        elif isinstance(template[key], dict) and isinstance(value, dict):
            found.extend(unknown_keys(template[key], value, prefix=f"{dotted}."))
    return sorted(found)


def spawn_generators(seed, count):
    """
    Independent random generators for `count` work items, derived from one
    seed. Item i always gets the same stream regardless of how the work is
    partitioned across workers.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def is_infinite(shots):
    return shots is None or (isinstance(shots, float) and math.isinf(shots))
