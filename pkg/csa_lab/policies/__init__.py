from policies.constant import ConstantPolicy
from policies.power import PowerPolicy

# Curves of the relative-std figure, top to bottom
FIGURE2_POLICIES = (
    "constant:1",
    "constant:0.5",
    "constant:0.2",
    "alpha:0.25",
    "alpha:0.3333333333333333",
    "alpha:0.5",
    "alpha:1",
)


def parse_policy(text):
    """
    Parse a cumulation policy given as constant:<c> or alpha:<alpha>

    Raises:
        ValueError: unknown policy kind or invalid value
    """
    kind, sep, value = text.partition(":")
    if not sep:
        raise ValueError("policy must look like constant:<c> or alpha:<alpha>, got {!r}".format(text))
    try:
        number = float(value)
    except ValueError:
        raise ValueError("policy value is not a number: {!r}".format(text)) from None
    if kind == "constant":
        return ConstantPolicy(number)
    elif kind == "alpha":
        return PowerPolicy(number)
    raise ValueError("Unknown policy kind: {}".format(kind))
