//! Regenerates the embedded mini150 dataset fixture. The unit tests assert
//! the committed CSV matches this generator byte for byte.

fn main() {
    print!("{}", pipeattrib_core::eval::generate_mini150().to_csv());
}
