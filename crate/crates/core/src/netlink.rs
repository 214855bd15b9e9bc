//! Emulated network links: delay with jitter, independent packet loss with
//! retransmission, and serialization at a fixed bandwidth.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MTU_PAYLOAD: usize = 1448;

/// One link, in SI units (seconds, bytes per second).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkProfile {
    pub delay_mean: f64,
    /// Standard deviation of the one-way delay.
    pub jitter: f64,
    pub loss_rate: f64,
    pub bandwidth: f64,
    pub mtu_payload: usize,
}

impl LinkProfile {
    pub fn new(delay_mean: f64, jitter: f64, loss_rate: f64, bandwidth: f64, mtu_payload: usize) -> Result<Self> {
        let link = LinkProfile {
            delay_mean,
            jitter,
            loss_rate,
            bandwidth,
            mtu_payload,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay_mean.is_finite() && self.delay_mean >= 0.0) {
            return Err(Error::invalid(format!("delay must be >= 0, got {}", self.delay_mean)));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::invalid(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        if !(0.0..1.0).contains(&self.loss_rate) {
            return Err(Error::invalid(format!("loss rate must be in [0, 1), got {}", self.loss_rate)));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::invalid(format!("bandwidth must be > 0, got {}", self.bandwidth)));
        }
        if self.mtu_payload == 0 {
            return Err(Error::invalid("mtu_payload must be > 0"));
        }
        Ok(())
    }

    /// Serialization time of one full packet.
    pub fn packet_time(&self) -> f64 {
        self.mtu_payload as f64 / self.bandwidth
    }

    pub fn packets_for(&self, payload_bytes: usize) -> usize {
        payload_bytes.div_ceil(self.mtu_payload).max(1)
    }
}

/// Link parameters as written in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub delay_ms: f64,
    pub jitter_ms: f64,
    pub loss_pct: f64,
    pub bandwidth_mbps: f64,
    #[serde(default = "default_mtu")]
    pub mtu_payload: usize,
}

fn default_mtu() -> usize {
    DEFAULT_MTU_PAYLOAD
}

impl LinkSpec {
    pub fn to_profile(&self) -> Result<LinkProfile> {
        LinkProfile::new(
            self.delay_ms / 1e3,
            self.jitter_ms / 1e3,
            self.loss_pct / 100.0,
            self.bandwidth_mbps * 1e6 / 8.0,
            self.mtu_payload,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferOutcome {
    pub duration: f64,
    /// Transmissions including retransmissions.
    pub packets_sent: usize,
    pub packets_lost: usize,
}

/// One-way delay drawn from `Normal(delay_mean, jitter)` truncated below at
/// zero (by rejection). Zero jitter returns the mean without consuming
/// randomness.
pub fn sample_delay<R: Rng + ?Sized>(link: &LinkProfile, rng: &mut R) -> f64 {
    if link.jitter == 0.0 {
        return link.delay_mean;
    }
    let normal = Normal::new(link.delay_mean, link.jitter).expect("validated jitter");
    loop {
        let d = normal.sample(rng);
        if d >= 0.0 {
            return d;
        }
    }
}

/// Time to deliver `payload_bytes` over `link`.
///
/// The payload is cut into `max(1, ceil(payload / mtu))` packets. Each
/// transmission is lost independently and retried until delivered; every
/// loss adds a round trip of `2 × sample_delay`. Randomness is consumed in a
/// prefix-stable order (base delay, then packet by packet), so a larger
/// payload replayed on the same stream never takes less time.
pub fn transfer_time<R: Rng + ?Sized>(link: &LinkProfile, payload_bytes: usize, rng: &mut R) -> TransferOutcome {
    let packets = link.packets_for(payload_bytes);
    let one_way = sample_delay(link, rng);
    let mut sent = 0usize;
    let mut lost = 0usize;
    let mut penalty = 0.0;
    for _ in 0..packets {
        loop {
            sent += 1;
            if rng.random::<f64>() < link.loss_rate {
                lost += 1;
                penalty += 2.0 * sample_delay(link, rng);
            } else {
                break;
            }
        }
    }
    TransferOutcome {
        duration: one_way + sent as f64 * link.packet_time() + penalty,
        packets_sent: sent,
        packets_lost: lost,
    }
}

/// Request transfer, compute, then response transfer on one stream.
pub fn round_trip<R: Rng + ?Sized>(
    link: &LinkProfile,
    request_bytes: usize,
    response_bytes: usize,
    compute_seconds: f64,
    rng: &mut R,
) -> f64 {
    debug_assert!(compute_seconds >= 0.0);
    let up = transfer_time(link, request_bytes, rng).duration;
    let down = transfer_time(link, response_bytes, rng).duration;
    up + compute_seconds + down
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn ideal(delay: f64) -> LinkProfile {
        LinkProfile::new(delay, 0.0, 0.0, 1_448_000.0, 1448).unwrap()
    }

    #[test]
    fn zero_jitter_delay_is_exact() {
        let link = LinkProfile::new(0.015, 0.0, 0.0, 1e6, 1448).unwrap();
        assert_eq!(sample_delay(&link, &mut seed::rng(1)), 0.015);
    }

    #[test]
    fn truncated_delay_non_negative() {
        let link = LinkProfile::new(0.0, 0.001, 0.0, 1e6, 1448).unwrap();
        let mut rng = seed::rng(2);
        assert!((0..10_000).all(|_| sample_delay(&link, &mut rng) >= 0.0));
    }

    #[test]
    fn ten_packets_closed_form() {
        let out = transfer_time(&ideal(0.010), 14_480, &mut seed::rng(3));
        assert_eq!(out.packets_sent, 10);
        assert_eq!(out.packets_lost, 0);
        assert!((out.duration - 0.020).abs() < 1e-15);
    }

    #[test]
    fn empty_payload_is_one_packet() {
        let link = ideal(0.010);
        let out = transfer_time(&link, 0, &mut seed::rng(3));
        assert_eq!(out.packets_sent, 1);
        assert_eq!(out.duration, 0.010 + link.packet_time());
    }

    #[test]
    fn round_trip_closed_form() {
        let link = ideal(0.002);
        let t = round_trip(&link, 3000, 100, 1.0, &mut seed::rng(0));
        let expected = (0.002 + 3.0 * link.packet_time()) + 1.0 + (0.002 + link.packet_time());
        assert_eq!(t, expected);
        let empty = round_trip(&link, 0, 0, 0.0, &mut seed::rng(0));
        assert_eq!(empty, 2.0 * (0.002 + link.packet_time()));
    }

    #[test]
    fn lossy_accounting() {
        let link = LinkProfile::new(0.001, 0.0002, 0.3, 1e7, 100).unwrap();
        let out = transfer_time(&link, 10_000, &mut seed::rng(4));
        assert_eq!(out.packets_lost, out.packets_sent - 100);
        assert!(out.packets_lost > 0);
    }

    #[test]
    fn wire_units() {
        let spec = LinkSpec {
            delay_ms: 15.0,
            jitter_ms: 3.0,
            loss_pct: 0.24,
            bandwidth_mbps: 200.0,
            mtu_payload: 1448,
        };
        let p = spec.to_profile().unwrap();
        assert_eq!(p.delay_mean, 0.015);
        assert_eq!(p.jitter, 0.003);
        assert!((p.loss_rate - 0.0024).abs() < 1e-15);
        assert_eq!(p.bandwidth, 25e6);
        let parsed: LinkSpec =
            serde_json::from_str(r#"{"delay_ms":1,"jitter_ms":0,"loss_pct":0,"bandwidth_mbps":8}"#).unwrap();
        assert_eq!(parsed.mtu_payload, DEFAULT_MTU_PAYLOAD);
    }

    #[test]
    fn invalid_profiles() {
        assert!(LinkProfile::new(-1.0, 0.0, 0.0, 1.0, 1).is_err());
        assert!(LinkProfile::new(0.0, -1.0, 0.0, 1.0, 1).is_err());
        assert!(LinkProfile::new(0.0, 0.0, 1.0, 1.0, 1).is_err());
        assert!(LinkProfile::new(0.0, 0.0, 0.0, 0.0, 1).is_err());
        assert!(LinkProfile::new(0.0, 0.0, 0.0, 1.0, 0).is_err());
    }
}
