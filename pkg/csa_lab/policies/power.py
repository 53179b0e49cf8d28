class PowerPolicy:
    def __init__(self, alpha):
        if not alpha > 0.0:
            raise ValueError("alpha must be > 0, got {}".format(alpha))
        self.alpha = float(alpha)

    def c_for(self, n):
        """
        Cumulation parameter c = 1 / (1 + n^alpha)

        Args:
            n: int or numpy array - Dimension(s)

        Returns:
            c in (0, 1) for every n >= 1
        """
        return 1.0 / (1.0 + n ** self.alpha)

    @property
    def label(self):
        return "alpha:{:g}".format(self.alpha)
