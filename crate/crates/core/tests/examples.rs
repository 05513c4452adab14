//! Every example must run to completion.

#[allow(dead_code)]
mod band_edges {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/band_edges.rs"));
}

#[test]
fn example_band_edges() {
    band_edges::run().unwrap();
}

#[allow(dead_code)]
mod spectrum_dos {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/spectrum_dos.rs"));
}

#[test]
fn example_spectrum_dos() {
    spectrum_dos::run().unwrap();
}

#[allow(dead_code)]
mod green_identity {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/green_identity.rs"));
}

#[test]
fn example_green_identity() {
    green_identity::run().unwrap();
}

#[allow(dead_code)]
mod thouless {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/thouless.rs"));
}

#[test]
fn example_thouless() {
    thouless::run().unwrap();
}

#[allow(dead_code)]
mod zero_energy {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/zero_energy.rs"));
}

#[test]
fn example_zero_energy() {
    zero_energy::run().unwrap();
}

#[allow(dead_code)]
mod zariski_rank {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/zariski_rank.rs"));
}

#[test]
fn example_zariski_rank() {
    zariski_rank::run().unwrap();
}

#[allow(dead_code)]
mod localization {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/localization.rs"));
}

#[test]
fn example_localization() {
    localization::run().unwrap();
}

#[allow(dead_code)]
mod wegner {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/wegner.rs"));
}

#[test]
fn example_wegner() {
    wegner::run().unwrap();
}

#[allow(dead_code)]
mod many_body {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/many_body.rs"));
}

#[test]
fn example_many_body() {
    many_body::run().unwrap();
}

#[allow(dead_code)]
mod lieb_robinson {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/lieb_robinson.rs"));
}

#[test]
fn example_lieb_robinson() {
    lieb_robinson::run().unwrap();
}

#[allow(dead_code)]
mod batch_run {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/batch_run.rs"));
}

#[test]
fn example_batch_run() {
    batch_run::run().unwrap();
}

