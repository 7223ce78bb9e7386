//! KubeFence core: derive workload-specific Kubernetes API policies from
//! Helm-style charts and validate API request bodies against them.
//!
//! The pipeline has four phases: generalize a chart's default values into a
//! typed values schema, enumerate schema variants to cover enumerated
//! options, render the chart templates per variant, and consolidate the
//! rendered manifests into a per-kind validator. The validation engine then
//! decides allow/deny for request bodies by hierarchical comparison against
//! the validator.

pub mod attack;
pub mod chart;
pub mod doc;
pub mod policy;
pub mod policy_io;
pub mod rbac;
pub mod schema;
pub mod surface;
pub mod template;
pub mod validate;

pub use doc::path::{FieldPath, PathPattern, Segment};
pub use doc::{parse_document, DocFormat, DocMapping, DocNode, DocValue, Scalar, ScalarKind};
pub use chart::{load_chart, Chart, ChartError, EnumAnnotation, LockRule, LockValueSpec};
pub use policy::{
    build_validator, explore_variants, generate, generate_values_schema, render_variants,
    GenerateOutcome, MergeOptions, PolicyError, Validator, ValuesSchema, ValuesVariant,
};
pub use policy_io::{validator_from_yaml, validator_to_yaml, values_schema_to_yaml};
pub use attack::{builtin_catalog, inject, run_catalog, AttackMatrix, CatalogEntry};
pub use rbac::RbacPolicy;
pub use surface::{analyze, compute_reduction, FieldCatalog, SurfaceReport};
pub use validate::{validate_object, validate_patch, PatchType, Verdict};
pub use schema::{
    infer_placeholder, value_matches, DenyReason, LockMode, LockValue, Placeholder, SchemaNode,
};
