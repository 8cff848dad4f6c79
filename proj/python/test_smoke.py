"""Smoke tests for the _ptycho extension against numpy oracles."""
import sys
import tempfile

import numpy as np

import _ptycho as pt


def check(name, ok):
    print(f"{'ok  ' if ok else 'FAIL'} {name}")
    return bool(ok)


def main():
    rng = np.random.default_rng(7)
    results = []

    # unnormalized DFT against numpy.fft
    x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    results.append(check("dft matches numpy.fft.fft2",
                         np.allclose(pt.dft(x), np.fft.fft2(x), rtol=1e-12, atol=1e-12)))
    results.append(check("idft inverts dft",
                         np.allclose(pt.idft(pt.dft(x)), x, rtol=1e-12, atol=1e-12)))

    # fresnel: unitary and invertible
    lam = pt.wavelength_from_kev(8.7)
    prop = pt.fresnel_propagate(x, 0.05, lam, 0.6e-6)
    results.append(check("fresnel preserves the norm",
                         np.isclose(np.linalg.norm(prop), np.linalg.norm(x))))
    back = pt.fresnel_propagate(prop, -0.05, lam, 0.6e-6)
    results.append(check("fresnel inverts by negating z", np.allclose(back, x, atol=1e-10)))

    # patch ops vs numpy slicing
    host = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    patch = pt.extract_patch(host, [1, 2], [3, 3])
    results.append(check("extract_patch is numpy slicing",
                         np.allclose(patch, host[1:4, 2:5])))
    emb = pt.embed_patch(patch, [1, 2], [6, 6])
    ref = np.zeros((6, 6), complex)
    ref[1:4, 2:5] = host[1:4, 2:5]
    results.append(check("embed_patch zero-pads", np.allclose(emb, ref)))

    vol = rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5))
    results.append(check("project_axis sums like numpy",
                         np.allclose(pt.project_axis(vol, 1), vol.sum(axis=1))))

    # amplitude loss against a direct numpy expression
    y = rng.uniform(0, 10, (5, 5))
    h = rng.uniform(0, 10, (5, 5))
    direct = np.sum((np.sqrt(y) - np.sqrt(h + 1e-12)) ** 2)
    results.append(check("amplitude_loss matches numpy",
                         np.isclose(pt.amplitude_loss(y, h), direct, rtol=1e-12)))

    # far-field Wirtinger gradient vs a numpy finite difference
    O = (rng.uniform(0.2, 1.0, (8, 8)) * np.exp(1j * rng.uniform(-1, 1, (8, 8))))
    P = (rng.uniform(0.2, 1.0, (4, 4)) * np.exp(1j * rng.uniform(-1, 1, (4, 4))))
    offsets = [[0, 0], [4, 4], [0, 4], [4, 0], [2, 2]]
    ys = [np.abs(np.fft.fft2(P * O[r:r + 4, c:c + 4])) ** 2 * rng.uniform(0.5, 1.5)
          for r, c in offsets]

    def loss_np(Ox):
        g = 0.0
        for (r, c), yj in zip(offsets, ys):
            hj = np.abs(np.fft.fft2(P * Ox[r:r + 4, c:c + 4])) ** 2
            g += np.sum((np.sqrt(yj) - np.sqrt(hj + 1e-12)) ** 2)
        return g

    loss, gO, gP = pt.farfield_loss_grads(O, P, offsets, ys)
    results.append(check("taped loss matches numpy forward",
                         np.isclose(loss, loss_np(O), rtol=1e-10)))
    eps = 1e-6
    i, j = 3, 5
    dO = np.zeros_like(O)
    dO[i, j] = eps
    fd_re = (loss_np(O + dO) - loss_np(O - dO)) / (2 * eps)
    fd_im = (loss_np(O + 1j * dO) - loss_np(O - 1j * dO)) / (2 * eps)
    results.append(check("Wirtinger gradient = (d/dRe + i d/dIm)/2 vs numpy FD",
                         np.isclose(fd_re, 2 * gO[i, j].real, rtol=1e-4)
                         and np.isclose(fd_im, 2 * gO[i, j].imag, rtol=1e-4)))

    loss_cf, gO_cf, gP_cf = pt.farfield_loss_grads(O, P, offsets, ys, closed_form=True)
    results.append(check("AD equals closed-form ePIE gradients",
                         np.allclose(gO, gO_cf, rtol=1e-10) and np.allclose(gP, gP_cf, rtol=1e-10)))

    # registration invariances
    truth = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    rot = truth * np.exp(1j * 0.8)
    results.append(check("registration removes global phase",
                         pt.register_nrmse(rot, truth)["nrmse"] < 1e-7))
    rolled = np.roll(truth, (2, -3), axis=(0, 1))
    results.append(check("registration removes integer shifts",
                         pt.register_nrmse(rolled, truth)["nrmse"] < 1e-6))

    # poisson moments
    draws = pt.poissonize(np.full((200, 200), 50.0), 123)
    results.append(check("poisson mean", abs(draws.mean() - 50.0) < 0.5))
    results.append(check("poisson variance", abs(draws.var() - 50.0) < 2.0))
    results.append(check("poisson determinism",
                         np.array_equal(draws, pt.poissonize(np.full((200, 200), 50.0), 123))))

    # end-to-end: tiny dataset and a short reconstruction from the true probe
    with tempfile.TemporaryDirectory() as td:
        n = pt.build_preset_dataset("farfield", td, [
            ("box", "32"), ("object", "24"), ("probe", "16"), ("step_px", "8"),
            ("photons", "100000"), ("aperture_width", "2.333e-6"),
        ])
        results.append(check("tiny dataset has a 3x3 scan", n == 9))
        out = pt.reconstruct(td, "ad-epie", 1, 9 * 20, 0.01, 1.0, 3)
        losses = np.array(out["losses"])
        results.append(check("ad-epie reduces the loss 10x",
                             losses[-5:].mean() < 0.1 * losses[:5].mean()))

    if not all(results):
        sys.exit(1)
    print(f"{len(results)} smoke checks passed")


if __name__ == "__main__":
    main()
