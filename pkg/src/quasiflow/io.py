"""Artifact writers: atomic text files, trajectory CSV, SVG snapshots, curve files."""
from __future__ import annotations

import os
import tempfile

import numpy as np

TRAJECTORY_COLUMNS = ("t", "perimeter", "area", "residual", "ball_radius", "eta", "xgamma_norm", "dirichlet_energy")
_CHANNEL_OF = {"dirichlet_energy": "energy"}

SVG_SIZE = 400


def write_text_atomic(path, text):
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x):
    return f"{x:.12e}" if np.isfinite(x) else "nan"


def trajectory_csv(traj) -> str:
    lines = [",".join(TRAJECTORY_COLUMNS)]
    cols = [traj.t] + [traj.channel(_CHANNEL_OF.get(c, c)) for c in TRAJECTORY_COLUMNS[1:]]
    for row in zip(*cols):
        lines.append(",".join(fmt(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def read_trajectory_csv(path):
    """Column name -> array."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def svg_snapshot(curves, container=None, extent=None, labels=None) -> str:
    """Closed polylines in a fixed viewBox (the container's bounding box by default)."""
    if extent is None:
        if container is not None:
            cx, cy = container.center
            r = 1.05 * container.radius
            extent = (cx - r, cy - r, cx + r, cy + r)
        else:
            extent = (-1.05, -1.05, 1.05, 1.05)
    x0, y0, x1, y1 = extent
    scale = SVG_SIZE / max(x1 - x0, y1 - y0)

    def pts(xy):
        px = (xy[:, 0] - x0) * scale
        py = (y1 - xy[:, 1]) * scale
        return " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(px, py))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}" '
           f'width="{SVG_SIZE}" height="{SVG_SIZE}">']
    if container is not None:
        cx, cy = container.center
        out.append(f'<circle cx="{(cx - x0) * scale:.3f}" cy="{(y1 - cy) * scale:.3f}" '
                   f'r="{container.radius * scale:.3f}" fill="none" stroke="#888" stroke-width="1"/>')
    colours = ("#1f4e9c", "#c0392b", "#27ae60", "#8e44ad")
    for i, curve in enumerate(curves):
        xy = np.asarray(curve.xy if hasattr(curve, "xy") else curve)
        xy = np.vstack([xy, xy[:1]])
        out.append(f'<polyline points="{pts(xy)}" fill="none" stroke="{colours[i % len(colours)]}" '
                   f'stroke-width="1.5"/>')
    if labels:
        out.append(f'<text x="8" y="18" font-size="12" font-family="monospace">{labels}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def curve_text(curve) -> str:
    """Fourier coefficients of the node interpolant, one (x, y) coefficient pair per line."""
    c = np.fft.rfft(curve.xy, axis=0) / curve.n
    cont = curve.container
    lines = [f"# curve N={curve.n} container_radius={float(cont.radius)!r} "
             f"container_center={float(cont.center[0])!r},{float(cont.center[1])!r}"]
    if curve.circle is not None:
        lines.append("# circle " + " ".join(repr(float(v)) for v in curve.circle))
    lines.append("# k re(x_k) im(x_k) re(y_k) im(y_k)")
    for k, (cx, cy) in enumerate(c):
        lines.append(" ".join([str(k)] + [repr(float(v)) for v in (cx.real, cx.imag, cy.real, cy.imag)]))
    return "\n".join(lines) + "\n"


def parse_curve_text(text):
    """Inverse of ``curve_text``: returns a ReferenceCurve (validation skipped)."""
    from .geometry import Container, ReferenceCurve

    header, circle, rows = {}, None, []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("# curve"):
            for item in line[len("# curve"):].split():
                key, val = item.split("=")
                header[key] = val
        elif line.startswith("# circle"):
            circle = tuple(float(v) for v in line.split()[2:])
        elif not line.startswith("#"):
            rows.append([float(v) for v in line.split()])
    n = int(header["N"])
    cx, cy = (float(v) for v in header["container_center"].split(","))
    container = Container(float(header["container_radius"]), (cx, cy))
    rows = np.array(rows)
    coef = np.stack([rows[:, 1] + 1j * rows[:, 2], rows[:, 3] + 1j * rows[:, 4]], axis=1)
    xy = np.fft.irfft(coef * n, n=n, axis=0)
    return ReferenceCurve(xy, container, circle)


def write_curve(path, curve):
    write_text_atomic(path, curve_text(curve))


def read_curve(path):
    with open(path) as fh:
        return parse_curve_text(fh.read())


def height_text(rho) -> str:
    """(theta_j, rho_j) table preceded by the base curve as comment lines."""
    base = "".join("# " + line + "\n" for line in curve_text(rho.base).splitlines())
    body = "".join(f"{float(t)!r} {float(v)!r}\n" for t, v in zip(rho.base.theta, rho.values))
    return base + "# theta rho\n" + body


def parse_height_text(text):
    from .hanzawa import HeightField

    base_lines, rows = [], []
    for line in text.splitlines():
        if line.startswith("# # ") or (line.startswith("# ") and line[2:3].isdigit()):
            base_lines.append(line[2:])
        elif line.strip() and not line.startswith("#"):
            rows.append([float(v) for v in line.split()])
    base = parse_curve_text("\n".join(base_lines))
    return HeightField(base, np.array(rows)[:, 1])


def write_heights(path, rho):
    write_text_atomic(path, height_text(rho))


def read_heights(path):
    with open(path) as fh:
        return parse_height_text(fh.read())


def norm_channels_csv(times, states, norms) -> str:
    """t and the X_0, X_1, X_{gamma,mu}, X_gamma norm proxies of each state."""
    lines = ["t,x0,x1,x_gamma_mu,x_gamma"]
    for t, u in zip(times, states):
        vals = (t, norms.x0(u), norms.x1(u), norms.xgm(u), norms.xg(u))
        lines.append(",".join(fmt(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


def diagnostics_text(diagnostics) -> str:
    """One block per Picard window."""
    out = []
    for i, d in enumerate(diagnostics):
        out += [
            f"[window {i}]",
            f"T          = {d.T:.12e}",
            f"kappa      = {d.kappa:.6e}",
            f"lip_A      = {d.lip_A:.6e}",
            f"lip_F      = {d.lip_F:.6e}",
            f"c_hat      = {d.c_hat:.6e}",
            f"radius     = {d.radius:.6e}",
            f"ball       = {d.ball:.6e}",
            f"iterations = {d.iterations}",
            f"halvings   = {d.halvings}",
            "",
        ]
    return "\n".join(out)
