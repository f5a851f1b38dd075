from .constraints import (
    BLOCKING, CONTACT, FREE, SELF, DofMatrix, GeometryConstraints, JointFrame, RelationalMatrix,
    build_constraints, build_relational_matrix, default_frame, detect_blocking, detect_contact,
    export_geometry_constraints, extract_dof_matrix, import_geometry_constraints,
)
from .mesh import TriangleMesh, box, from_triangle_soup, merge, rotation_about
from .stl import dump_stl_ascii, dump_stl_binary, parse_stl, read_stl

__all__ = [
    "BLOCKING", "CONTACT", "FREE", "SELF", "DofMatrix", "GeometryConstraints", "JointFrame",
    "RelationalMatrix", "TriangleMesh", "box", "build_constraints", "build_relational_matrix",
    "default_frame", "detect_blocking", "detect_contact", "dump_stl_ascii", "dump_stl_binary",
    "export_geometry_constraints", "extract_dof_matrix", "from_triangle_soup",
    "import_geometry_constraints", "merge", "parse_stl", "read_stl", "rotation_about",
]
