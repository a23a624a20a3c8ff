#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub type Tree = &'static [(&'static str, &'static str)];

pub const TWO_FILE: Tree = &[
    ("A.py", "import B\nx = B.f(34)\n"),
    (
        "B.cpp",
        "#include <pybind11/pybind11.h>\n\
         int f(int a);\n\
         int square(int x) { return x * x; }\n\
         int f(int a) { return square(a); }\n\
         PYBIND11_MODULE(B, m) {\n  m.def(\"f\", &f);\n}\n",
    ),
];

pub const TWO_FILE_DOT: &str = "digraph G {\n  \
    \"A.py::<module>\" [label=\"A:<module>\", shape=box];\n  \
    \"B.cpp::f\" [label=\"f\", shape=ellipse];\n  \
    \"B.cpp::square\" [label=\"square\", shape=ellipse];\n  \
    \"A.py::<module>\" -> \"B.cpp::f\" [style=dashed];\n  \
    \"B.cpp::f\" -> \"B.cpp::square\";\n}\n";

const B_H: &str = "#pragma once\nint f(int a);\n";
const F_CPP: &str =
    "#include \"B.h\"\nint square(int x) { return x * x; }\nint f(int a) { return square(a); }\n";
const BIND: &str = "#include \"B.h\"\n#include <pybind11/pybind11.h>\nPYBIND11_MODULE(B, m) {\n  m.def(\"f\", &f);\n}\n";
const USE_B: &str = "import B\nx = B.f(34)\n";

/// Header, implementation and binding kept in separate components.
pub const COMPLIANT: Tree = &[
    ("A.py", USE_B),
    ("B.h", B_H),
    ("f.cpp", F_CPP),
    ("B.cpp", BIND),
];

pub const MISNAMED: Tree = &[
    ("A.py", USE_B),
    ("B.h", B_H),
    ("f.cpp", F_CPP),
    ("src/bindings.cpp", BIND),
];

pub const IMPL_IN_BINDING: Tree = &[
    ("A.py", USE_B),
    ("B.h", B_H),
    (
        "B.cpp",
        "#include \"B.h\"\n#include <pybind11/pybind11.h>\n\
         int square(int x) { return x * x; }\n\
         int f(int a) { return square(a); }\n\
         PYBIND11_MODULE(B, m) {\n  m.def(\"f\", &f);\n}\n",
    ),
];

pub const LAMBDA: Tree = &[
    ("A.py", "import B\nx = B.f(34)\ny = B.g(2)\n"),
    ("B.h", B_H),
    ("f.cpp", F_CPP),
    (
        "B.cpp",
        "#include \"B.h\"\n#include <pybind11/pybind11.h>\nPYBIND11_MODULE(B, m) {\n  m.def(\"f\", &f);\n  m.def(\"g\", [](int a) { return a + 1; });\n}\n",
    ),
];

pub const TWO_MODULES: Tree = &[
    ("A.py", "import B\nimport C\nx = B.f(34)\ny = C.g(2)\n"),
    ("B.h", "#pragma once\nint f(int a);\nint g(int a);\n"),
    (
        "f.cpp",
        "#include \"B.h\"\nint f(int a) { return a; }\nint g(int a) { return f(a) * 2; }\n",
    ),
    (
        "B.cpp",
        "#include \"B.h\"\n#include <pybind11/pybind11.h>\n\
         PYBIND11_MODULE(B, m) {\n  m.def(\"f\", &f);\n}\n\
         PYBIND11_MODULE(C, m) {\n  m.def(\"g\", &g);\n}\n",
    ),
];

pub const DYNAMIC_IMPORT: Tree = &[
    (
        "A.py",
        "import importlib\nB = importlib.import_module(\"B\")\nx = B.f(34)\n",
    ),
    ("B.h", B_H),
    ("f.cpp", F_CPP),
    ("B.cpp", BIND),
];

/// Exposed name held in a string variable with one reaching literal.
pub const NAME_VARIABLE: Tree = &[(
    "g.cpp",
    "#include <string>\n\
     int g(int a) { return a; }\n\
     std::string n = \"g\";\n\
     PYBIND11_MODULE(g, m) {\n  m.def(n, &g);\n}\n",
)];

/// Two distinct literals reach the use.
pub const NAME_VARIABLE_TWICE: Tree = &[(
    "g.cpp",
    "#include <string>\n\
     int g(int a) { return a; }\n\
     PYBIND11_MODULE(g, m) {\n  std::string n = \"g\";\n  if (alt) n = \"h\";\n  m.def(n, &g);\n}\n",
)];

pub fn write_tree(dir: &Path, tree: Tree) {
    for (path, text) in tree {
        let path = dir.join(path);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }
}

pub fn tree_dir(root: &Path, name: &str, tree: Tree) -> PathBuf {
    let dir = root.join(name);
    write_tree(&dir, tree);
    dir
}

pub fn ffilint() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ffilint"))
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(args: &[&str], cwd: &Path) -> Run {
    let out = ffilint()
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}
