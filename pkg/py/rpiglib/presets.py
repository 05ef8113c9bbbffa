"""Reference models with known closed forms.

Synopsis:

    p = presets.preset('geometric-escape', l=0.9, q=0.5)
    presets.closed_form('geometric_alpha', l=0.9, q=0.5)
"""
import math

from . import model
from .model import Player


class InvalidPresetException(Exception):
    """Thrown if preset parameters are out of range."""
    pass


class OutOfRegimeException(Exception):
    """Thrown if a closed form is evaluated outside the case it covers."""
    pass


presets = {}
formulas = {}


def register_preset(name):
    def wrapped(fn):
        presets[name] = fn
        return fn
    return wrapped


def register_formula(name):
    def wrapped(fn):
        formulas[name] = fn
        return fn
    return wrapped


def preset(name, **params):
    """Builds the preset `name` (see `presets`) from keyword parameters."""
    if name not in presets:
        raise InvalidPresetException(
            f'unknown preset {name!r}, choose from {sorted(presets)}')
    try:
        return presets[name](**params)
    except TypeError as e:
        raise InvalidPresetException(f'{name}: {e}')
    except model.InvalidModelException as e:
        raise InvalidPresetException(f'{name}: {e}')


def closed_form(name, **params):
    if name not in formulas:
        raise KeyError(f'unknown formula {name!r}')
    return formulas[name](**params)


def _activation_blocks(q, offspring, leaf, internal):
    if not 0 <= q <= 1:
        raise InvalidPresetException(f'q={q} not in [0, 1]')
    blocks = [model.Block(q, Player.I, offspring, leaf, internal),
              model.Block(1 - q, Player.II, offspring, leaf, internal)]
    return model.PrimitiveDistribution(b for b in blocks if b.weight > 0)


###############################################################################
# presets
###############################################################################


@register_preset('geometric-escape')
def geometric_escape(l, q):  # noqa: E741
    """Geometric(l) offspring, capacity 0 on leaves and 1 elsewhere."""
    if not 0 < l < 1:
        raise InvalidPresetException(f'l={l} not in (0, 1)')
    return _activation_blocks(
        q, model.GeometricOffspring(l),
        model.PointCapacity(0.0), model.PointCapacity(1.0))


@register_preset('nary-uniform')
def nary_uniform(n, q):
    """Exactly n children, capacities uniform on [0, 1]."""
    if not (isinstance(n, int) and n >= 2):
        raise InvalidPresetException(f'n={n!r} must be an integer >= 2')
    uniform = model.UniformCapacity(0.0, 1.0)
    return _activation_blocks(q, model.FixedOffspring(n), uniform, uniform)


@register_preset('classical-gw')
def classical_gw(offspring):
    """Only player I moves; capacity 1 if the node has children, else 0."""
    return model.PrimitiveDistribution([model.Block(
        1.0, Player.I, offspring,
        model.PointCapacity(0.0), model.PointCapacity(1.0))])


@register_preset('finite-uniform-leaf')
def finite_uniform_leaf(offspring, q):
    """Subcritical trees; leaves carry uniform capacities, others 1."""
    if not offspring.mean() < 1:
        raise InvalidPresetException(
            f'offspring mean {offspring.mean()} must be < 1')
    return _activation_blocks(
        q, offspring, model.UniformCapacity(0.0, 1.0), model.PointCapacity(1.0))


###############################################################################
# closed forms
###############################################################################


@register_formula('geometric_qc')
def geometric_qc(l):  # noqa: E741
    return (1 - l) * (1 - l + l ** 2) / (l ** 2 * (2 - l))


@register_formula('geometric_d')
def geometric_d(l, q):  # noqa: E741
    return q * l / (1 - l) + (1 - q) * (1 - l) * l


@register_formula('geometric_alpha')
def geometric_alpha(l, q):  # noqa: E741
    if q <= geometric_qc(l):
        return 1.0
    return ((2 - l) * (1 - q) / 2
            + math.sqrt(4 * (1 - l) ** 2 / l ** 2 + (2 - l) ** 2 * (1 - q) ** 2) / 2)


@register_formula('nary_qc')
def nary_qc(k, n):
    if (1 - k) * n <= 1:
        return 1.0
    return 1 / ((1 - k) * n)


@register_formula('nary_d')
def nary_d(k, n, q):
    return (1 - k) * n * q


@register_formula('nary_alpha_binary')
def nary_alpha_binary(k, q):
    if 2 * (1 - k) * q <= 1:
        return 1.0
    return k / ((1 - k) * (2 * q - 1))


@register_formula('nary_alpha_ternary')
def nary_alpha_ternary(k, q):
    if 3 * (1 - k) * q <= 1:
        return 1.0
    return (2 - 3 * q) / 2 + math.sqrt((2 - 3 * q) ** 2 + 4 * k / (1 - k)) / 2


@register_formula('nary_esssup')
def nary_esssup(n, q):
    if n * q <= 1:
        return 0.0
    return 1 - 1 / (n * q)


@register_formula('geometric_cond')
def geometric_cond(l, alpha):  # noqa: E741
    beta = 1 - alpha
    return {
        'alpha_I': (1 - l) / (1 - l * alpha),
        'alpha_II': ((1 - l) ** 2 + (2 * l - l ** 2) * alpha) / (1 - l + l * alpha),
        'beta_I': l * beta / (1 - l + l * beta),
        'beta_II': l * (1 - l) * beta / (1 - l * beta),
    }


@register_formula('nary_cond')
def nary_cond(k, n, alpha):
    beta = 1 - alpha
    return {
        'alpha_I': 1 - (1 - k) + (1 - k) * alpha ** n,
        'alpha_II': 1 - (1 - k) * (1 - alpha) ** n,
        'beta_I': (1 - k) - (1 - k) * (1 - beta) ** n,
        'beta_II': (1 - k) * beta ** n,
    }


@register_formula('geometric_star_stats')
def geometric_star_stats(l, q, beta):  # noqa: E741
    if not beta > 0:
        raise OutOfRegimeException('conditional statistics need β > 0')
    return {
        'activation_I': l * q / (1 - l + l * beta),
        'mean_I': 1 + l * beta / (1 - l),
        'mean_II': 1 / (1 - l * beta),
        'mean': q * l / (1 - l) + (1 - q) * l * (1 - l) / (1 - l * beta) ** 2,
    }


@register_formula('nary_star_stats')
def nary_star_stats(k, n, q, beta):
    if not beta > 0:
        raise OutOfRegimeException('conditional statistics need β > 0')
    return {
        'activation_I': q * ((1 - k) - (1 - k) * (1 - beta) ** n) / beta,
        'mean_I': n * beta / (1 - (1 - beta) ** n),
        'mean_II': float(n),
        'mean': q * (1 - k) * n + (1 - q) * (1 - k) * n * beta ** (n - 1),
    }


@register_formula('geometric_avoidance_alpha')
def geometric_avoidance_alpha(l, q):  # noqa: E741
    if q <= geometric_qc(l):
        return 1.0
    return ((1 - l + l ** 2 - l ** 2 * q)
            / (l * (1 - l + l ** 2 + l * (1 - l) * q)))


@register_formula('nary_avoidance_alpha_ternary')
def nary_avoidance_alpha_ternary(k, q):
    if 3 * (1 - k) * q <= 1:
        return 1.0
    return -0.5 + math.sqrt(1 / ((1 - k) * q) - 0.75)


@register_formula('nary_limit')
def nary_limit(k, q):
    return 1 - q + q * k
