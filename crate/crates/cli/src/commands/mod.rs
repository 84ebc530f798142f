pub mod report;
pub mod simulate;
pub mod subordinate;
pub mod tv;
pub mod wass;
