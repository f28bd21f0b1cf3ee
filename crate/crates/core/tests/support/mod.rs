pub mod arp_invariants;
