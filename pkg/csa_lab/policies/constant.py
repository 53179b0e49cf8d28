class ConstantPolicy:
    def __init__(self, c):
        if not 0.0 < c <= 1.0:
            raise ValueError("constant c must be in (0, 1], got {}".format(c))
        self.c = float(c)

    def c_for(self, n):
        """
        Cumulation parameter used in dimension n

        Args:
            n: int or numpy array - Dimension(s)

        Returns:
            The constant c, broadcast to the shape of n
        """
        return self.c + 0.0 * n

    @property
    def label(self):
        return "constant:{:g}".format(self.c)
