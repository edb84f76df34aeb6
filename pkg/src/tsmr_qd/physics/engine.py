"""Numba kernel integrating a tensegrity chain together with its controller.

Point masses at the nodes, tension-only cables with a dashpot, rods and
inter-module links kept at fixed length by SHAKE-style projection, penalty
contact against the ground plane and axis-aligned wall boxes, and Coulomb
ground friction applied at position level.
"""
import math

import numpy as np
from numba import njit

GOAL_REACHING = 0
SQUEEZING = 1


@njit(cache=True)
def _sigmoid(x):
    if x < -60.0:
        return 0.0
    if x > 60.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(-x))


@njit(cache=True)
def run_network(values, inputs, input_idx, order, bias, in_ptr, in_src, in_w, output_idx, outputs):
    """Feed-forward pass; ``order`` lists non-input nodes topologically."""
    for i in range(input_idx.shape[0]):
        values[input_idx[i]] = inputs[i]
    for k in range(order.shape[0]):
        node = order[k]
        acc = bias[node]
        for e in range(in_ptr[k], in_ptr[k + 1]):
            acc += in_w[e] * values[in_src[e]]
        values[node] = _sigmoid(acc)
    for i in range(output_idx.shape[0]):
        outputs[i] = values[output_idx[i]]


@njit(cache=True)
def _wrap_angle(a):
    while a > math.pi:
        a -= 2.0 * math.pi
    while a <= -math.pi:
        a += 2.0 * math.pi
    return a


@njit(cache=True)
def _segment_hits_box(px, py, dx, dy, length, xmin, xmax, ymin, ymax):
    # slab test of p + s*d, s in [0, length]
    t0 = 0.0
    t1 = length
    if abs(dx) < 1e-12:
        if px < xmin or px > xmax:
            return False
    else:
        a = (xmin - px) / dx
        b = (xmax - px) / dx
        if a > b:
            a, b = b, a
        t0 = max(t0, a)
        t1 = min(t1, b)
        if t0 > t1:
            return False
    if abs(dy) < 1e-12:
        if py < ymin or py > ymax:
            return False
    else:
        a = (ymin - py) / dy
        b = (ymax - py) / dy
        if a > b:
            a, b = b, a
        t0 = max(t0, a)
        t1 = min(t1, b)
        if t0 > t1:
            return False
    return True


@njit(cache=True)
def _head_state(x, front_face, n_head):
    hx = 0.0
    hy = 0.0
    for i in range(n_head):
        hx += x[i, 0]
        hy += x[i, 1]
    hx /= n_head
    hy /= n_head
    fx = 0.0
    fy = 0.0
    for i in range(3):
        fx += x[front_face[i], 0]
        fy += x[front_face[i], 1]
    fx /= 3.0
    fy /= 3.0
    dx = fx - hx
    dy = fy - hy
    nrm = math.sqrt(dx * dx + dy * dy)
    if nrm < 1e-12:
        dx, dy = 1.0, 0.0
    else:
        dx /= nrm
        dy /= nrm
    return hx, hy, fx, fy, dx, dy


@njit(cache=True)
def _distance_bearing(hx, hy, dx, dy, tx, ty):
    rx = tx - hx
    ry = ty - hy
    dist = math.sqrt(rx * rx + ry * ry)
    bearing = _wrap_angle(math.atan2(dx * ry - dy * rx, dx * rx + dy * ry))
    return dist, bearing


@njit(cache=True)
def sense(x, front_face, kind, target, aperture, walls, sensor_range, out):
    """Fill ``out`` with the task's sensor vector for node positions ``x``."""
    hx, hy, fx, fy, dx, dy = _head_state(x, front_face, 12)
    d, b = _distance_bearing(hx, hy, dx, dy, target[0], target[1])
    out[0] = d
    out[1] = b
    if kind == SQUEEZING:
        d, b = _distance_bearing(hx, hy, dx, dy, aperture[0], aperture[1])
        out[2] = d
        out[3] = b
        flag = 0.0
        for w in range(walls.shape[0]):
            if _segment_hits_box(fx, fy, dx, dy, sensor_range, walls[w, 0], walls[w, 1], walls[w, 2], walls[w, 3]):
                flag = 1.0
                break
        out[4] = flag


@njit(cache=True)
def _shake(x, xold, pairs, lengths):
    """Restore pair lengths by moving both ends along the previous-step pair
    direction (central corrections keep angular momentum)."""
    for r in range(pairs.shape[0]):
        i = pairs[r, 0]
        j = pairs[r, 1]
        rx = xold[j, 0] - xold[i, 0]
        ry = xold[j, 1] - xold[i, 1]
        rz = xold[j, 2] - xold[i, 2]
        sx = x[j, 0] - x[i, 0]
        sy = x[j, 1] - x[i, 1]
        sz = x[j, 2] - x[i, 2]
        # |s + 2 g r|^2 = l^2
        a = 4.0 * (rx * rx + ry * ry + rz * rz)
        b = 4.0 * (sx * rx + sy * ry + sz * rz)
        c = sx * sx + sy * sy + sz * sz - lengths[r] * lengths[r]
        if a < 1e-24:
            continue
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            g = -b / (2.0 * a)
        else:
            sq = math.sqrt(disc)
            g1 = (-b + sq) / (2.0 * a)
            g2 = (-b - sq) / (2.0 * a)
            g = g1 if abs(g1) < abs(g2) else g2
        x[j, 0] += g * rx
        x[j, 1] += g * ry
        x[j, 2] += g * rz
        x[i, 0] -= g * rx
        x[i, 1] -= g * ry
        x[i, 2] -= g * rz


@njit(cache=True)
def simulate_kernel(
    pos0, rods, rod_len, links, link_len, cables, cable_rest, cable_module, front_face, n_modules,
    net_input_idx, net_order, net_bias, net_in_ptr, net_in_src, net_in_w, net_output_idx, n_net_nodes,
    noise, kind, target, aperture, entrance_x, walls, wall_height, sensor_range,
    dt, n_steps, ctrl_every, sample_every, mass, gravity, mu, k_ground, c_ground, k_wall, c_wall,
    cable_k, cable_c, air_c, amplitude, f_lo, f_hi, iters, record_energy,
):
    """Integrate one episode.

    Returns (trajectory (n_samples, 2), final positions, max head penetration
    past the entrance plane, min cable force, aborted flag, kinetic energy per
    step (empty unless ``record_energy``)).
    """
    n = pos0.shape[0]
    x = pos0.copy()
    v = np.zeros_like(x)
    xp = np.zeros_like(x)
    f = np.zeros_like(x)
    n_in = net_input_idx.shape[0]
    n_out = net_output_idx.shape[0]
    sensors = np.zeros(n_in)
    values = np.zeros(n_net_nodes)
    outputs = np.zeros(n_out)
    freq = np.zeros(n_modules)
    phase = np.zeros(n_modules)
    eta = np.zeros(n_modules)
    act = np.zeros(n_modules)
    n_samples = n_steps // sample_every
    traj = np.zeros((n_samples, 2))
    energy = np.zeros(n_steps if record_energy else 0)
    max_pen = -1e300
    min_force = 1e300
    aborted = False
    inv_m = 1.0 / mass
    two_pi = 2.0 * math.pi
    ctrl = 0

    for step in range(n_steps):
        t = step * dt
        if step % ctrl_every == 0:
            for i in range(n):
                if not (abs(x[i, 0]) < 100.0 and abs(x[i, 1]) < 100.0 and abs(x[i, 2]) < 100.0):
                    aborted = True
                    break
            if aborted:
                break
            sense(x, front_face, kind, target, aperture, walls, sensor_range, sensors)
            run_network(values, sensors, net_input_idx, net_order, net_bias, net_in_ptr,
                        net_in_src, net_in_w, net_output_idx, outputs)
            for k in range(n_modules):
                freq[k] = f_lo + (f_hi - f_lo) * outputs[2 * k]
                phase[k] = two_pi * outputs[2 * k + 1]
                eta[k] = noise[ctrl, k]
            ctrl += 1

        for k in range(n_modules):
            s = math.sin(two_pi * freq[k] * t + phase[k])
            a = amplitude * (1.0 + eta[k]) * (s if s > 0.0 else 0.0)
            act[k] = min(a, 0.9)

        # forces
        for i in range(n):
            f[i, 0] = -air_c * v[i, 0]
            f[i, 1] = -air_c * v[i, 1]
            f[i, 2] = -air_c * v[i, 2] - mass * gravity
        for c in range(cables.shape[0]):
            i = cables[c, 0]
            j = cables[c, 1]
            ex = x[j, 0] - x[i, 0]
            ey = x[j, 1] - x[i, 1]
            ez = x[j, 2] - x[i, 2]
            L = math.sqrt(ex * ex + ey * ey + ez * ez)
            rest = cable_rest[c]
            m = cable_module[c]
            if m >= 0:
                rest *= 1.0 - act[m]
            if L <= rest:
                # slack cable
                if min_force > 0.0:
                    min_force = 0.0
                continue
            inv_l = 1.0 / L
            vrel = ((v[j, 0] - v[i, 0]) * ex + (v[j, 1] - v[i, 1]) * ey + (v[j, 2] - v[i, 2]) * ez) * inv_l
            force = cable_k * (L - rest) + cable_c * vrel
            if force < 0.0:
                force = 0.0
            if force < min_force:
                min_force = force
            s_f = force * inv_l
            fx = s_f * ex
            fy = s_f * ey
            fz = s_f * ez
            f[i, 0] += fx
            f[i, 1] += fy
            f[i, 2] += fz
            f[j, 0] -= fx
            f[j, 1] -= fy
            f[j, 2] -= fz
        for i in range(n):
            if x[i, 2] < 0.0:
                fn = -k_ground * x[i, 2] - c_ground * v[i, 2]
                if fn > 0.0:
                    f[i, 2] += fn
            if x[i, 2] < wall_height:
                for w in range(walls.shape[0]):
                    px = x[i, 0]
                    py = x[i, 1]
                    if px > walls[w, 0] and px < walls[w, 1] and py > walls[w, 2] and py < walls[w, 3]:
                        d0 = px - walls[w, 0]
                        d1 = walls[w, 1] - px
                        d2 = py - walls[w, 2]
                        d3 = walls[w, 3] - py
                        dm = min(min(d0, d1), min(d2, d3))
                        if dm == d0:
                            f[i, 0] -= k_wall * d0 + c_wall * v[i, 0]
                        elif dm == d1:
                            f[i, 0] += k_wall * d1 - c_wall * v[i, 0]
                        elif dm == d2:
                            f[i, 1] -= k_wall * d2 + c_wall * v[i, 1]
                        else:
                            f[i, 1] += k_wall * d3 - c_wall * v[i, 1]

        # semi-implicit Euler
        for i in range(n):
            v[i, 0] += dt * inv_m * f[i, 0]
            v[i, 1] += dt * inv_m * f[i, 1]
            v[i, 2] += dt * inv_m * f[i, 2]
            xp[i, 0] = x[i, 0]
            xp[i, 1] = x[i, 1]
            xp[i, 2] = x[i, 2]
            x[i, 0] += dt * v[i, 0]
            x[i, 1] += dt * v[i, 1]
            x[i, 2] += dt * v[i, 2]

        for _ in range(iters):
            _shake(x, xp, rods, rod_len)
            _shake(x, xp, links, link_len)
        # position-level Coulomb friction: undo tangential slip up to mu * fn * dt^2 / m
        inv_dt = 1.0 / dt
        for i in range(n):
            if xp[i, 2] < 0.0:
                cap = mu * (-k_ground * xp[i, 2]) * dt * dt * inv_m
                sx = x[i, 0] - xp[i, 0]
                sy = x[i, 1] - xp[i, 1]
                st = math.sqrt(sx * sx + sy * sy)
                if st > 0.0:
                    scale = 0.0 if cap >= st else 1.0 - cap / st
                    x[i, 0] = xp[i, 0] + scale * sx
                    x[i, 1] = xp[i, 1] + scale * sy
            v[i, 0] = (x[i, 0] - xp[i, 0]) * inv_dt
            v[i, 1] = (x[i, 1] - xp[i, 1]) * inv_dt
            v[i, 2] = (x[i, 2] - xp[i, 2]) * inv_dt

        if record_energy:
            ke = 0.0
            for i in range(n):
                ke += v[i, 0] * v[i, 0] + v[i, 1] * v[i, 1] + v[i, 2] * v[i, 2]
            energy[step] = 0.5 * mass * ke

        hx = 0.0
        for i in range(12):
            hx += x[i, 0]
        pen = hx / 12.0 - entrance_x
        if pen > max_pen:
            max_pen = pen

        if (step + 1) % sample_every == 0:
            hy = 0.0
            for i in range(12):
                hy += x[i, 1]
            s_idx = (step + 1) // sample_every - 1
            traj[s_idx, 0] = hx / 12.0
            traj[s_idx, 1] = hy / 12.0

    if not aborted:
        for i in range(n):
            if not (math.isfinite(x[i, 0]) and math.isfinite(x[i, 1]) and math.isfinite(x[i, 2])):
                aborted = True
                break
    return traj, x, max_pen, min_force, aborted, energy
