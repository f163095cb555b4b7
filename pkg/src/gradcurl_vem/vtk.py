"""VTK XML unstructured-grid writer for polyhedral cells with cell data."""

from __future__ import annotations

import numpy as np

VTK_POLYHEDRON = 42


def _array(name, values, ncomp=1, dtype="Float64"):
    vals = " ".join(repr(float(v)) if dtype.startswith("Float") else str(int(v))
                    for v in np.ravel(values))
    return (f'<DataArray type="{dtype}" Name="{name}" NumberOfComponents="{ncomp}" '
            f'format="ascii">{vals}</DataArray>')


def write_vtu(mesh, path, cell_data=None):
    """Write ``mesh`` as VTK_POLYHEDRON cells; ``cell_data`` maps names to (N,) or (N,3)."""
    conn, offsets, faces, faceoffsets = [], [], [], []
    for cf in mesh.cells:
        vids = np.unique(np.concatenate([mesh.faces[f] for f in cf]))
        conn.extend(vids.tolist())
        offsets.append(len(conn))
        stream = [len(cf)]
        for f in cf:
            stream += [len(mesh.faces[f])] + mesh.faces[f].tolist()
        faces.extend(stream)
        faceoffsets.append(len(faces))
    parts = [
        '<?xml version="1.0"?>',
        '<VTKFile type="UnstructuredGrid" version="1.0" byte_order="LittleEndian">',
        "<UnstructuredGrid>",
        f'<Piece NumberOfPoints="{mesh.n_vertices}" NumberOfCells="{mesh.n_cells}">',
        "<Points>", _array("Points", mesh.vertices, 3), "</Points>",
        "<Cells>",
        _array("connectivity", conn, dtype="Int64"),
        _array("offsets", offsets, dtype="Int64"),
        _array("types", [VTK_POLYHEDRON] * mesh.n_cells, dtype="UInt8"),
        _array("faces", faces, dtype="Int64"),
        _array("faceoffsets", faceoffsets, dtype="Int64"),
        "</Cells>",
    ]
    if cell_data:
        parts.append("<CellData>")
        for name, vals in cell_data.items():
            vals = np.asarray(vals, dtype=float)
            parts.append(_array(name, vals, 1 if vals.ndim == 1 else vals.shape[1]))
        parts.append("</CellData>")
    parts += ["</Piece>", "</UnstructuredGrid>", "</VTKFile>"]
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def curl_cell_means(system, psi_h_full):
    """Cell value of the L2 projection of curl psi_h (its constant coefficient)."""
    from .assembly import v_indices

    out = np.empty((system.mesh.n_cells, 3))
    for cell, lm in zip(system.cells, system.local):
        coef = lm.pack.p01_w @ (lm.E @ psi_h_full[v_indices(system.mesh, cell)])
        out[cell.index] = coef[0::4]
    return out
