pub mod hand_cases;
pub mod merit;
