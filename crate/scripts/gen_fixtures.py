"""Regenerate the molecular integral fixtures under crates/core/tests/fixtures.

Writes an FCIDUMP (MO basis, chemist notation) and a dipole file holding
e.D in the same MO basis, with the origin at the centre of nuclear charge so
that the nuclear dipole vanishes for neutral molecules.

Usage: python3 scripts/gen_fixtures.py
"""
import os
import numpy as np
from pyscf import gto, scf, ao2mo
from pyscf.tools import fcidump

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "crates", "core", "tests", "fixtures")


def write_dipole(path, mats):
    n = mats[0].shape[0]
    with open(path, "w") as f:
        f.write(f"{n} {len(mats)}\n")
        for m in mats:
            for row in m:
                f.write(" ".join(f"{x: .16e}" for x in row) + "\n")


def build(name, atom, basis, axis):
    mol = gto.M(atom=atom, basis=basis, unit="Angstrom", verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    charges = mol.atom_charges()
    coords = mol.atom_coords()
    centre = np.einsum("i,ix->x", charges, coords) / charges.sum()
    with mol.with_common_orig(centre):
        r_ao = mol.intor_symmetric("int1e_r", comp=3)
    axis = np.asarray(axis, dtype=float)
    axis /= np.linalg.norm(axis)
    d_ao = -np.einsum("x,xij->ij", axis, r_ao)
    c = mf.mo_coeff
    d_mo = c.T @ d_ao @ c
    fcidump.from_scf(mf, os.path.join(OUT, f"{name}.fcidump"), tol=1e-14)
    write_dipole(os.path.join(OUT, f"{name}.dipole"), [d_mo])
    print(name, "E_RHF =", mf.e_tot, "norb =", c.shape[1], "nelec =", mol.nelectron)


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    build("h2_sto3g", "H 0 0 0; H 0 0 0.74", "sto-3g", [0, 0, 1])
    build("lih_sto3g", "Li 0 0 0; H 0 0 1.595", "sto-3g", [0, 0, 1])
    build("h2o_sto3g", "O 0 0 0.1173; H 0 0.7572 -0.4692; H 0 -0.7572 -0.4692",
          "sto-3g", [0, 0, 1])
