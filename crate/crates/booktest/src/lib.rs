//! Compiles the guide's listings as doctests, one module per chapter.

macro_rules! chapter {
    ($name:ident, $file:literal) => {
        #[doc = include_str!(concat!("../../../book/src/", $file))]
        pub mod $name {}
    };
}

chapter!(index, "index.md");
chapter!(geometry, "geometry.md");
chapter!(groups, "groups.md");
chapter!(representations, "representations.md");
chapter!(spectra, "spectra.md");
chapter!(error_term, "error-term.md");
chapter!(cli, "cli.md");
