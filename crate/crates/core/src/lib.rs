pub mod devmaps;
pub mod errterm;
pub mod fuchsian;
pub mod hypgeo;
pub mod linrep;
pub mod oseledets;
pub mod report;
pub mod selftest;
pub mod word;
