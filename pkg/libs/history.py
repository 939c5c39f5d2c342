HEADER = "iter,compliance,volume_fraction,max_change,seconds"


class OptimizationHistory:
    def __init__(self, timing=True):
        # False writes 0 seconds so two identical runs give identical files
        self.timing = timing
        self.iterations = []
        self.compliance = []
        self.volume_fraction = []
        self.max_change = []
        self.seconds = []
        self.assembly_seconds = []
        self.solve_seconds = []
        self.beta = []
        self.stop_reason = None
        self.first_assembly = 0.0
        self.average_assembly = 0.0

    def __len__(self):
        return len(self.iterations)

    def record(self, iteration, compliance, volume_fraction, max_change, seconds,
               assembly_seconds=0.0, solve_seconds=0.0, beta=None):
        if not 0.0 <= volume_fraction <= 1.0:
            raise ValueError(f"Volume fraction {volume_fraction} outside [0, 1] at iteration {iteration}")
        self.iterations.append(int(iteration))
        self.compliance.append(float(compliance))
        self.volume_fraction.append(float(volume_fraction))
        self.max_change.append(float(max_change))
        self.seconds.append(float(seconds) if self.timing else 0.0)
        self.assembly_seconds.append(float(assembly_seconds) if self.timing else 0.0)
        self.solve_seconds.append(float(solve_seconds) if self.timing else 0.0)
        self.beta.append(beta)

    @property
    def final_compliance(self):
        return self.compliance[-1] if self.compliance else None

    @property
    def final_volume_fraction(self):
        return self.volume_fraction[-1] if self.volume_fraction else None

    def rows(self):
        return zip(self.iterations, self.compliance, self.volume_fraction, self.max_change, self.seconds)

    def write_csv(self, filename):
        # repr keeps every bit of the floats
        with open(filename, "w", newline="\n") as fp:
            fp.write(HEADER + "\n")
            for row in self.rows():
                fp.write(",".join(repr(value) for value in row) + "\n")

    def timing_breakdown(self):
        """Total, first and average iteration time, first and average assembly time, in seconds.

        total_assembly and total_solve add up the per iteration assembly and solve times.
        """
        total = sum(self.seconds)
        first = self.seconds[0] if self.seconds else 0.0
        average = total / len(self.seconds) if self.seconds else 0.0
        return {
            "total": total,
            "first_iteration": first,
            "average_iteration": average,
            "first_assembly": self.first_assembly if self.timing else 0.0,
            "average_assembly": self.average_assembly if self.timing else 0.0,
            "total_assembly": sum(self.assembly_seconds),
            "total_solve": sum(self.solve_seconds),
        }


def read_csv(filename):
    """Rows of a history file as tuples (iter, compliance, volume_fraction, max_change, seconds)."""
    rows = []
    with open(filename) as fp:
        header = fp.readline().strip()
        if header != HEADER:
            raise ValueError(f"Unexpected history header {header!r}")
        for line in fp:
            if line.strip():
                it, c, vf, ch, sec = line.strip().split(",")
                rows.append((int(it), float(c), float(vf), float(ch), float(sec)))
    return rows
