pub mod bundle;
pub mod semispray;
pub mod defect;
pub mod forms;
pub mod algebroid;
pub mod linalg;
pub mod morphism;
pub mod numerics;
pub mod scalar;
