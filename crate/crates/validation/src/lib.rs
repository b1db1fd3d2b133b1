//! Holds the `acceptance` test target, which runs the full experiment
//! suite against `imgconn` and prints one line per criterion.
