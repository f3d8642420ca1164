"""Sweep the closed-form information quantities across ensemble size and time.

Prints two small tables:
  * Q_tilde vs J at fixed kappa*t, showing the linear -> quadratic crossover
    (and how losses push the crossover to larger J),
  * the information split F_record / Q_cond / Q_bar vs kappa*t at J = 1e6,
    including the fraction of the total carried by the classical record.

Everything here is closed-form; runtime is milliseconds.
"""

import numpy as np

from magmon import ModelParams, effective_qfi, scaling_slope


def crossover_table():
    print("Q_tilde vs J at kappa*t = 1 (gamma/kappa = 1)")
    print(f"{'J':>10} {'eta=1.0':>12} {'eta=0.5':>12} {'eta=0.1':>12}")
    for J in np.logspace(0, 9, 10):
        row = []
        for eta in (1.0, 0.5, 0.1):
            p = ModelParams(J=J, kappa=1.0, gamma=1.0, eta=eta, B=0.0)
            row.append(effective_qfi(p, 1.0).Q_tilde)
        print(f"{J:>10.1e} {row[0]:>12.3e} {row[1]:>12.3e} {row[2]:>12.3e}")
    print()
    for eta, window in ((1.0, (1e6, 1e8)), (0.5, (1e7, 1e9)), (0.1, (1e7, 1e9))):
        p = ModelParams(J=1e7, kappa=1.0, gamma=1.0, eta=eta, B=0.0)
        s = scaling_slope(p, 1.0, "Q_tilde", axis="J", window=window)
        print(f"  log-log J-slope in {window} at eta={eta}: {s:.3f}")
    print()


def split_table():
    print("information split at J = 1e6, eta = 1")
    print(f"{'kappa*t':>8} {'F_record':>12} {'Q_cond':>12} {'Q_tilde':>12} "
          f"{'Q_bar':>12} {'F/Q_tilde':>10}")
    for kt in (0.01, 0.03, 0.1, 0.3, 1.0, 3.0):
        p = ModelParams(J=1e6, kappa=1.0, gamma=1.0, eta=1.0, B=0.0)
        rep = effective_qfi(p, kt)
        frac = rep.F_record / rep.Q_tilde
        print(f"{kt:>8.2f} {rep.F_record:>12.4e} {rep.Q_cond:>12.4e} "
              f"{rep.Q_tilde:>12.4e} {rep.Q_bar:>12.4e} {frac:>10.4f}")
    print()
    print("note: Q_tilde == Q_bar at eta = 1 (perfect detection is optimal);")
    print("the record alone carries ~1/4 of the total at kappa*t = 1.")


if __name__ == "__main__":
    crossover_table()
    split_table()
