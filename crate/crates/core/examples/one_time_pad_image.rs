//! Encrypts a 168 x 144 one-bit image (24192 bits) with key drawn from the
//! sifted Z-basis bits of a simulated run, then shows that one bit less of
//! key is refused.
//!
//! The key here is the raw sifted key (no error correction or privacy
//! amplification), which is enough to exercise the pad.

use mdiqkd::otp::{otp_xor, KeyMaterial, OtpError};
use mdiqkd::{Basis, ExperimentConfig, Simulator};

const W: usize = 168;
const H: usize = 144;

fn image() -> Vec<u8> {
    // a ring on a plain background, packed MSB first
    let mut bytes = vec![0u8; W * H / 8];
    for y in 0..H {
        for x in 0..W {
            let (dx, dy) = (x as f64 - 84.0, y as f64 - 72.0);
            let r = (dx * dx + dy * dy).sqrt();
            if (40.0..56.0).contains(&r) {
                let i = y * W + x;
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
    }
    bytes
}

fn preview(bytes: &[u8]) {
    for y in (0..H).step_by(12) {
        let row: String = (0..W)
            .step_by(4)
            .map(|x| {
                let i = y * W + x;
                if bytes[i / 8] & (0x80 >> (i % 8)) != 0 { '#' } else { '.' }
            })
            .collect();
        println!("  {row}");
    }
}

fn sifted_key(bits: usize) -> Vec<bool> {
    // back-to-back, Z only, signal intensity only: key accumulates quickly
    let mut cfg = ExperimentConfig::paper_50km();
    cfg.fiber_length_km_alice = 0.0;
    cfg.fiber_length_km_bob = 0.0;
    cfg.basis_prob_z = 1.0;
    cfg.intensities_alice = [0.5; 4];
    cfg.intensities_bob = [0.5; 4];
    cfg.pulse_pairs = u64::MAX;
    let sim = Simulator::new(&cfg).expect("valid config");
    let mut key = Vec::with_capacity(bits);
    let mut round = 0;
    while key.len() < bits {
        let o = sim.simulate_round(round);
        round += 1;
        if o.basis_alice == Basis::Z && o.basis_bob == Basis::Z && o.clicks.is_bsm_success() {
            key.push(o.bit_alice);
        }
    }
    println!("{bits} sifted bits after {round} rounds");
    key
}

fn main() {
    let plain = image();
    assert_eq!(plain.len() * 8, 24192);
    println!("plaintext");
    preview(&plain);

    let bits = sifted_key(plain.len() * 8);
    let mut alice = KeyMaterial::from_bits(&bits);
    let mut bob = alice.clone();
    let cipher = otp_xor(&plain, &mut alice).expect("enough key");
    let ones = cipher.iter().map(|b| b.count_ones()).sum::<u32>();
    println!("ciphertext, {:.3} of bits set", ones as f64 / 24192.0);
    preview(&cipher);

    let back = otp_xor(&cipher, &mut bob).expect("enough key");
    assert_eq!(back, plain);
    println!("decrypted image matches; {} key bits left", bob.remaining());

    let mut short = KeyMaterial::from_bits(&bits[..24191]);
    match otp_xor(&plain, &mut short) {
        Err(e @ OtpError::InsufficientKey { .. }) => println!("with 24191 key bits: {e}"),
        other => panic!("expected a refusal, got {other:?}"),
    }
}
