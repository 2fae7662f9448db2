// SPDX-License-Identifier: Apache-2.0

//! Field trees for nested data and their mapping onto flat columns.
//!
//! A [`TypeSpec`] describes a nested type: records of named members,
//! variable-length collections, and primitive leaves. [`FieldTree::build`]
//! decomposes it into fields numbered in depth-first pre-order. Every
//! collection owns one OFFSET column of cumulative `u64` end offsets and every
//! leaf owns one VALUE column; records own nothing.
//!
//! For `{fId: i64, fTracks: vec<{fEnergy: f32, fIds: vec<i32>}>}` the columns
//! are, in order:
//!
//! ```text
//! fId                  VALUE  i64
//! fTracks              OFFSET u64
//! fTracks._0.fEnergy   VALUE  f32
//! fTracks._0.fIds      OFFSET u64
//! fTracks._0.fIds._0   VALUE  i32
//! ```
//!
//! Offsets are cluster-local: the writer resets the running bases at every
//! cluster boundary, which is what makes a sealed cluster relocatable.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Name of the implicit element field of a collection.
pub const ITEM_NAME: &str = "_0";

/// Wire value of `parent_id` for the root field.
pub const ROOT_PARENT: u32 = 0xFFFF_FFFF;

const NO_LEAF_TYPE: u8 = 0xFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FieldKind {
    Record = 0,
    Collection = 1,
    Leaf = 2,
}

impl FieldKind {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Self::Record),
            1 => Ok(Self::Collection),
            2 => Ok(Self::Leaf),
            other => Err(Error::InvalidSchema(format!("unknown field kind {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum LeafType {
    I32 = 0,
    I64 = 1,
    F32 = 2,
    F64 = 3,
}

impl LeafType {
    pub const fn width(self) -> usize {
        match self {
            Self::I32 | Self::F32 => 4,
            Self::I64 | Self::F64 => 8,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Self::I32 => "i32",
            Self::I64 => "i64",
            Self::F32 => "f32",
            Self::F64 => "f64",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "i32" => Ok(Self::I32),
            "i64" => Ok(Self::I64),
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            other => Err(Error::UnsupportedLeafType(other.to_string())),
        }
    }

    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Self::I32),
            1 => Ok(Self::I64),
            2 => Ok(Self::F32),
            3 => Ok(Self::F64),
            other => Err(Error::UnsupportedLeafType(format!("wire id {other}"))),
        }
    }
}

/// Nested type description from which a [`FieldTree`] is built.
///
/// The textual form accepted by [`TypeSpec::parse`] and produced by `Display`
/// is `i32 | i64 | f32 | f64 | vec<T> | {name: T, ...}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeSpec {
    Leaf(LeafType),
    Record(Vec<(String, TypeSpec)>),
    Collection(Box<TypeSpec>),
}

impl TypeSpec {
    pub fn record<N: Into<String>>(members: impl IntoIterator<Item = (N, TypeSpec)>) -> Self {
        Self::Record(members.into_iter().map(|(n, t)| (n.into(), t)).collect())
    }

    pub fn collection(element: TypeSpec) -> Self {
        Self::Collection(Box::new(element))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = SpecParser { s: text.as_bytes(), pos: 0 };
        let spec = p.parse_type()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(Error::TypeSyntax(format!("trailing input at byte {}", p.pos)));
        }
        Ok(spec)
    }
}

impl fmt::Display for TypeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Leaf(t) => f.write_str(t.name()),
            Self::Collection(inner) => write!(f, "vec<{inner}>"),
            Self::Record(members) => {
                f.write_str("{")?;
                for (i, (name, t)) in members.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{name}: {t}")?;
                }
                f.write_str("}")
            }
        }
    }
}

struct SpecParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl SpecParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::TypeSyntax(format!("expected `{}` at byte {}", c as char, self.pos)))
        }
    }

    fn ident(&mut self) -> Result<&str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len()
            && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::TypeSyntax(format!("expected identifier at byte {start}")));
        }
        Ok(std::str::from_utf8(&self.s[start..self.pos]).expect("ascii"))
    }

    fn parse_type(&mut self) -> Result<TypeSpec> {
        if self.eat(b'{') {
            let mut members = Vec::new();
            if !self.eat(b'}') {
                loop {
                    let name = self.ident()?.to_string();
                    self.expect(b':')?;
                    members.push((name, self.parse_type()?));
                    if self.eat(b'}') {
                        break;
                    }
                    self.expect(b',')?;
                }
            }
            return Ok(TypeSpec::Record(members));
        }
        let word = self.ident()?;
        if word == "vec" {
            self.expect(b'<')?;
            let inner = self.parse_type()?;
            self.expect(b'>')?;
            return Ok(TypeSpec::collection(inner));
        }
        LeafType::from_name(word).map(TypeSpec::Leaf)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub parent: Option<usize>,
    pub name: String,
    pub kind: FieldKind,
    pub leaf_type: Option<LeafType>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Offset,
    Value,
}

/// Element type stored in a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    U64,
    Leaf(LeafType),
}

impl ElementType {
    pub const fn width(self) -> usize {
        match self {
            Self::U64 => 8,
            Self::Leaf(t) => t.width(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnDescriptor {
    pub column_id: usize,
    pub source_field: usize,
    pub role: ColumnRole,
    pub element_type: ElementType,
}

impl ColumnDescriptor {
    pub const fn element_width(&self) -> usize {
        self.element_type.width()
    }
}

/// One element of a column as produced by shredding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Offset(u64),
    I32(i32),
    I64(i64),
    F32(f32),
    F64(f64),
}

impl Element {
    #[inline]
    pub fn write_le(self, out: &mut Vec<u8>) {
        match self {
            Self::Offset(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::I32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::I64(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::F32(v) => out.extend_from_slice(&v.to_le_bytes()),
            Self::F64(v) => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

/// A nested value conforming to some [`FieldTree`].
///
/// Record members appear in field order. Equality and ordering compare floats
/// by their total order, so `NaN == NaN` and `-0.0 != 0.0`; this is the notion
/// of exactness a storage round trip must satisfy.
#[derive(Debug, Clone)]
pub enum Value {
    I32(i32),
    I64(i64),
    F32(f32),
    F64(f64),
    Record(Vec<Value>),
    Collection(Vec<Value>),
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Self::I32(_) => 0,
            Self::I64(_) => 1,
            Self::F32(_) => 2,
            Self::F64(_) => 3,
            Self::Record(_) => 4,
            Self::Collection(_) => 5,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Self::I32(v) => Some(v as f64),
            Self::I64(v) => Some(v as f64),
            Self::F32(v) => Some(v as f64),
            Self::F64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_record(&self) -> Option<&[Value]> {
        match self {
            Self::Record(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_collection(&self) -> Option<&[Value]> {
        match self {
            Self::Collection(v) => Some(v),
            _ => None,
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::I32(a), Self::I32(b)) => a.cmp(b),
            (Self::I64(a), Self::I64(b)) => a.cmp(b),
            (Self::F32(a), Self::F32(b)) => a.total_cmp(b),
            (Self::F64(a), Self::F64(b)) => a.total_cmp(b),
            (Self::Record(a), Self::Record(b)) | (Self::Collection(a), Self::Collection(b)) => {
                a.cmp(b)
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

/// Immutable field tree with its precomputed column mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldTree {
    fields: Vec<Field>,
    children: Vec<Vec<usize>>,
    columns: Vec<ColumnDescriptor>,
    field_column: Vec<Option<usize>>,
    /// Whether a field lies below some collection.
    nested: Vec<bool>,
}

impl FieldTree {
    /// Decomposes `spec` into fields rooted at a field called `root_name`.
    pub fn build(root_name: &str, spec: &TypeSpec) -> Result<Self> {
        let mut fields = Vec::new();
        push_fields(&mut fields, None, root_name, spec)?;
        Self::from_fields(fields)
    }

    /// Validates a pre-order field list and derives the column mapping.
    pub fn from_fields(fields: Vec<Field>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidSchema("no fields".into()));
        }
        if u32::try_from(fields.len()).map_or(true, |n| n == ROOT_PARENT) {
            return Err(Error::InvalidSchema("too many fields".into()));
        }
        let mut children = vec![Vec::new(); fields.len()];
        let mut stack: Vec<usize> = Vec::new();
        for (id, f) in fields.iter().enumerate() {
            validate_name(&f.name)?;
            match (id, f.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::InvalidSchema("root has a parent".into())),
                (_, None) => return Err(Error::InvalidSchema(format!("field {id} has no parent"))),
                (_, Some(p)) => {
                    if p >= id {
                        return Err(Error::InvalidSchema(format!(
                            "field {id} has parent {p} not preceding it"
                        )));
                    }
                    while stack.last().is_some_and(|&top| top != p) {
                        stack.pop();
                    }
                    if stack.is_empty() {
                        return Err(Error::InvalidSchema(format!(
                            "field {id} breaks depth-first pre-order"
                        )));
                    }
                    if children[p].iter().any(|&c: &usize| fields[c].name == f.name) {
                        return Err(Error::DuplicateField {
                            parent: fields[p].name.clone(),
                            name: f.name.clone(),
                        });
                    }
                    children[p].push(id);
                }
            }
            stack.push(id);
        }
        for (id, f) in fields.iter().enumerate() {
            let n = children[id].len();
            match f.kind {
                FieldKind::Record if n == 0 => return Err(Error::EmptyRecord(f.name.clone())),
                FieldKind::Collection if n != 1 => {
                    return Err(Error::InvalidSchema(format!(
                        "collection `{}` has {n} children",
                        f.name
                    )))
                }
                FieldKind::Collection if fields[children[id][0]].name != ITEM_NAME => {
                    return Err(Error::InvalidSchema(format!(
                        "collection `{}` element is not named `{ITEM_NAME}`",
                        f.name
                    )))
                }
                FieldKind::Leaf if n != 0 => {
                    return Err(Error::InvalidSchema(format!("leaf `{}` has children", f.name)))
                }
                _ => {}
            }
            if (f.kind == FieldKind::Leaf) != f.leaf_type.is_some() {
                return Err(Error::InvalidSchema(format!(
                    "field `{}` leaf type does not match its kind",
                    f.name
                )));
            }
        }

        let mut columns = Vec::new();
        let mut field_column = vec![None; fields.len()];
        let mut nested = vec![false; fields.len()];
        for (id, f) in fields.iter().enumerate() {
            if let Some(p) = f.parent {
                nested[id] = nested[p] || fields[p].kind == FieldKind::Collection;
            }
            let element_type = match f.kind {
                FieldKind::Record => continue,
                FieldKind::Collection => ElementType::U64,
                FieldKind::Leaf => ElementType::Leaf(f.leaf_type.expect("validated")),
            };
            let role = match f.kind {
                FieldKind::Collection => ColumnRole::Offset,
                _ => ColumnRole::Value,
            };
            field_column[id] = Some(columns.len());
            columns.push(ColumnDescriptor {
                column_id: columns.len(),
                source_field: id,
                role,
                element_type,
            });
        }
        Ok(Self { fields, children, columns, field_column, nested })
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, id: usize) -> &Field {
        &self.fields[id]
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn columns(&self) -> &[ColumnDescriptor] {
        &self.columns
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// The column owned by a field, if any.
    pub fn field_column(&self, field: usize) -> Option<usize> {
        self.field_column[field]
    }

    /// True if the field sits below at least one collection, i.e. its column
    /// does not hold exactly one element per entry.
    pub fn is_nested(&self, field: usize) -> bool {
        self.nested[field]
    }

    pub fn root_name(&self) -> &str {
        &self.fields[0].name
    }

    /// Dotted path of a field relative to the root, e.g. `fTracks._0.fIds`.
    /// The root itself has the empty path.
    pub fn path(&self, field: usize) -> String {
        let mut parts = Vec::new();
        let mut cur = field;
        while let Some(p) = self.fields[cur].parent {
            parts.push(self.fields[cur].name.as_str());
            cur = p;
        }
        parts.reverse();
        parts.join(".")
    }

    pub fn find(&self, path: &str) -> Option<usize> {
        let mut cur = 0;
        if path.is_empty() {
            return Some(0);
        }
        for part in path.split('.') {
            cur = *self.children[cur].iter().find(|&&c| self.fields[c].name == part)?;
        }
        Some(cur)
    }

    pub fn resolve(&self, path: &str) -> Result<usize> {
        self.find(path).ok_or_else(|| Error::UnknownField(path.to_string()))
    }

    /// Reconstructs the type description of the subtree rooted at `field`.
    pub fn type_spec(&self, field: usize) -> TypeSpec {
        let f = &self.fields[field];
        match f.kind {
            FieldKind::Leaf => TypeSpec::Leaf(f.leaf_type.expect("validated")),
            FieldKind::Collection => TypeSpec::collection(self.type_spec(self.children[field][0])),
            FieldKind::Record => TypeSpec::Record(
                self.children[field]
                    .iter()
                    .map(|&c| (self.fields[c].name.clone(), self.type_spec(c)))
                    .collect(),
            ),
        }
    }

    /// Checks that `entry` conforms to the tree.
    pub fn check_entry(&self, entry: &Value) -> Result<()> {
        if self.conforms(0, entry) {
            return Ok(());
        }
        self.check_field(0, entry)
    }

    /// Fast structural check; [`check_field`](Self::check_field) explains failures.
    fn conforms(&self, field: usize, value: &Value) -> bool {
        let f = &self.fields[field];
        match value {
            Value::Record(members) => {
                let kids = &self.children[field];
                f.kind == FieldKind::Record
                    && kids.len() == members.len()
                    && kids.iter().zip(members).all(|(&c, v)| match v {
                        Value::Record(_) | Value::Collection(_) => self.conforms(c, v),
                        leaf => self.fields[c].leaf_type == Some(leaf_kind(leaf)),
                    })
            }
            Value::Collection(items) => {
                f.kind == FieldKind::Collection && {
                    let item = self.children[field][0];
                    match self.fields[item].leaf_type {
                        Some(LeafType::I32) => items.iter().all(|v| matches!(v, Value::I32(_))),
                        Some(LeafType::I64) => items.iter().all(|v| matches!(v, Value::I64(_))),
                        Some(LeafType::F32) => items.iter().all(|v| matches!(v, Value::F32(_))),
                        Some(LeafType::F64) => items.iter().all(|v| matches!(v, Value::F64(_))),
                        None => items.iter().all(|v| self.conforms(item, v)),
                    }
                }
            }
            leaf => f.leaf_type == Some(leaf_kind(leaf)),
        }
    }

    fn check_field(&self, field: usize, value: &Value) -> Result<()> {
        let f = &self.fields[field];
        let mismatch = |reason: String| Error::TypeMismatch { path: self.path(field), reason };
        match (f.kind, value) {
            (FieldKind::Leaf, v) => {
                let ok = matches!(
                    (f.leaf_type.expect("validated"), v),
                    (LeafType::I32, Value::I32(_))
                        | (LeafType::I64, Value::I64(_))
                        | (LeafType::F32, Value::F32(_))
                        | (LeafType::F64, Value::F64(_))
                );
                if !ok {
                    return Err(mismatch(format!(
                        "expected {}, got {}",
                        f.leaf_type.expect("validated").name(),
                        value_kind(v)
                    )));
                }
                Ok(())
            }
            (FieldKind::Record, Value::Record(members)) => {
                let kids = &self.children[field];
                if members.len() != kids.len() {
                    return Err(mismatch(format!(
                        "expected {} members, got {}",
                        kids.len(),
                        members.len()
                    )));
                }
                kids.iter().zip(members).try_for_each(|(&c, v)| self.check_field(c, v))
            }
            (FieldKind::Collection, Value::Collection(items)) => {
                let item = self.children[field][0];
                items.iter().try_for_each(|v| self.check_field(item, v))
            }
            (kind, v) => Err(mismatch(format!("expected {kind:?}, got {}", value_kind(v)))),
        }
    }

    /// Shreds one conforming entry into column elements.
    ///
    /// `bases` holds, per column, the running cluster-local end offset of each
    /// OFFSET column (entries for VALUE columns are ignored). It is advanced in
    /// place. The entry is type-checked before anything is emitted, so a
    /// mismatch leaves `bases` and the sink untouched.
    pub fn shred_into<F>(&self, entry: &Value, bases: &mut [u64], emit: &mut F) -> Result<()>
    where
        F: FnMut(usize, Element) -> Result<()>,
    {
        assert_eq!(bases.len(), self.columns.len(), "one base per column");
        self.check_entry(entry)?;
        self.shred_field(0, entry, bases, emit)
    }

    fn shred_field<F>(&self, field: usize, value: &Value, bases: &mut [u64], emit: &mut F) -> Result<()>
    where
        F: FnMut(usize, Element) -> Result<()>,
    {
        match value {
            Value::Record(members) => {
                for (&c, v) in self.children[field].iter().zip(members) {
                    self.shred_field(c, v, bases, emit)?;
                }
                Ok(())
            }
            Value::Collection(items) => {
                let col = self.field_column[field].expect("collections own a column");
                bases[col] += items.len() as u64;
                emit(col, Element::Offset(bases[col]))?;
                let item = self.children[field][0];
                for v in items {
                    self.shred_field(item, v, bases, emit)?;
                }
                Ok(())
            }
            leaf => {
                let col = self.field_column[field].expect("leaves own a column");
                let e = match *leaf {
                    Value::I32(v) => Element::I32(v),
                    Value::I64(v) => Element::I64(v),
                    Value::F32(v) => Element::F32(v),
                    Value::F64(v) => Element::F64(v),
                    _ => unreachable!(),
                };
                emit(col, e)
            }
        }
    }

    /// Convenience form of [`shred_into`](Self::shred_into) returning one
    /// element list per column.
    pub fn shred_entry(&self, entry: &Value, bases: &mut [u64]) -> Result<Vec<Vec<Element>>> {
        let mut out = vec![Vec::new(); self.columns.len()];
        self.shred_into(entry, bases, &mut |c, e| {
            out[c].push(e);
            Ok(())
        })?;
        Ok(out)
    }

    /// Count-prefixed little-endian field records.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.fields.len() as u32).to_le_bytes());
        for (id, f) in self.fields.iter().enumerate() {
            out.extend_from_slice(&(id as u32).to_le_bytes());
            let parent = f.parent.map_or(ROOT_PARENT, |p| p as u32);
            out.extend_from_slice(&parent.to_le_bytes());
            out.push(f.kind as u8);
            out.push(f.leaf_type.map_or(NO_LEAF_TYPE, |t| t as u8));
            out.extend_from_slice(&(f.name.len() as u16).to_le_bytes());
            out.extend_from_slice(f.name.as_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let corrupt = |what: &str| Error::InvalidSchema(format!("truncated schema ({what})"));
        let mut pos = 0usize;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt(what))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        let count = u32::from_le_bytes(take(4, "count")?.try_into().expect("4 bytes")) as usize;
        // every record is at least 12 bytes; reject counts the buffer cannot hold
        if count.saturating_mul(12) > bytes.len() {
            return Err(corrupt("field count"));
        }
        let mut fields = Vec::with_capacity(count);
        for expected_id in 0..count {
            let head = take(12, "field record")?;
            let id = u32::from_le_bytes(head[0..4].try_into().expect("4 bytes")) as usize;
            let parent = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
            let kind = FieldKind::from_u8(head[8])?;
            let leaf_type = match head[9] {
                NO_LEAF_TYPE => None,
                t => Some(LeafType::from_u8(t)?),
            };
            let name_len = u16::from_le_bytes(head[10..12].try_into().expect("2 bytes")) as usize;
            if id != expected_id {
                return Err(Error::InvalidSchema(format!(
                    "field id {id} at position {expected_id}"
                )));
            }
            let name = std::str::from_utf8(take(name_len, "name")?)
                .map_err(|_| Error::InvalidSchema("field name is not UTF-8".into()))?
                .to_string();
            let parent = (parent != ROOT_PARENT).then_some(parent as usize);
            fields.push(Field { parent, name, kind, leaf_type });
        }
        if pos != bytes.len() {
            return Err(Error::InvalidSchema("trailing bytes after schema".into()));
        }
        Self::from_fields(fields)
    }

    /// Restricts the tree to the given field paths.
    ///
    /// Each kept field brings along its whole subtree and all of its ancestors.
    /// An empty list keeps everything.
    pub fn project<S: AsRef<str>>(&self, keep: &[S]) -> Result<Projection> {
        let mut kept = vec![keep.is_empty(); self.fields.len()];
        for path in keep {
            let id = self.resolve(path.as_ref())?;
            let mut cur = Some(id);
            while let Some(c) = cur {
                kept[c] = true;
                cur = self.fields[c].parent;
            }
            self.mark_subtree(id, &mut kept);
        }
        let spec = self.projected_spec(0, &kept);
        let tree = FieldTree::build(self.root_name(), &spec)?;
        Ok(Projection { source: self.clone(), kept, tree })
    }

    fn mark_subtree(&self, id: usize, kept: &mut [bool]) {
        kept[id] = true;
        for &c in &self.children[id] {
            self.mark_subtree(c, kept);
        }
    }

    fn projected_spec(&self, field: usize, kept: &[bool]) -> TypeSpec {
        let f = &self.fields[field];
        match f.kind {
            FieldKind::Leaf => TypeSpec::Leaf(f.leaf_type.expect("validated")),
            FieldKind::Collection => {
                TypeSpec::collection(self.projected_spec(self.children[field][0], kept))
            }
            FieldKind::Record => TypeSpec::Record(
                self.children[field]
                    .iter()
                    .filter(|&&c| kept[c])
                    .map(|&c| (self.fields[c].name.clone(), self.projected_spec(c, kept)))
                    .collect(),
            ),
        }
    }
}

#[inline]
fn leaf_kind(v: &Value) -> LeafType {
    match v {
        Value::I32(_) => LeafType::I32,
        Value::I64(_) => LeafType::I64,
        Value::F32(_) => LeafType::F32,
        Value::F64(_) => LeafType::F64,
        Value::Record(_) | Value::Collection(_) => unreachable!("not a leaf"),
    }
}

fn value_kind(v: &Value) -> &'static str {
    match v {
        Value::I32(_) => "i32",
        Value::I64(_) => "i64",
        Value::F32(_) => "f32",
        Value::F64(_) => "f64",
        Value::Record(_) => "record",
        Value::Collection(_) => "collection",
    }
}

fn validate_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains('.') {
        return Err(Error::InvalidName(name.to_string()));
    }
    Ok(())
}

fn push_fields(fields: &mut Vec<Field>, parent: Option<usize>, name: &str, spec: &TypeSpec) -> Result<()> {
    validate_name(name)?;
    let id = fields.len();
    match spec {
        TypeSpec::Leaf(t) => fields.push(Field {
            parent,
            name: name.to_string(),
            kind: FieldKind::Leaf,
            leaf_type: Some(*t),
        }),
        TypeSpec::Collection(inner) => {
            fields.push(Field {
                parent,
                name: name.to_string(),
                kind: FieldKind::Collection,
                leaf_type: None,
            });
            push_fields(fields, Some(id), ITEM_NAME, inner)?;
        }
        TypeSpec::Record(members) => {
            if members.is_empty() {
                return Err(Error::EmptyRecord(name.to_string()));
            }
            let mut seen = HashSet::new();
            for (member, _) in members {
                if !seen.insert(member.as_str()) {
                    return Err(Error::DuplicateField {
                        parent: name.to_string(),
                        name: member.clone(),
                    });
                }
            }
            fields.push(Field {
                parent,
                name: name.to_string(),
                kind: FieldKind::Record,
                leaf_type: None,
            });
            for (member, t) in members {
                push_fields(fields, Some(id), member, t)?;
            }
        }
    }
    Ok(())
}

/// A horizontal cut through a [`FieldTree`].
#[derive(Debug, Clone)]
pub struct Projection {
    source: FieldTree,
    kept: Vec<bool>,
    tree: FieldTree,
}

impl Projection {
    /// The projected tree; projected values conform to it.
    pub fn tree(&self) -> &FieldTree {
        &self.tree
    }

    pub fn source(&self) -> &FieldTree {
        &self.source
    }

    pub fn keeps_field(&self, source_field: usize) -> bool {
        self.kept[source_field]
    }

    /// Columns of the source tree needed to materialize the projection.
    pub fn source_columns(&self) -> Vec<bool> {
        self.source
            .columns()
            .iter()
            .map(|c| self.kept[c.source_field])
            .collect()
    }

    /// Drops unkept members from a value of the source tree.
    pub fn apply(&self, value: &Value) -> Value {
        self.apply_field(0, value)
    }

    fn apply_field(&self, field: usize, value: &Value) -> Value {
        match value {
            Value::Record(members) => Value::Record(
                self.source.children(field)
                    .iter()
                    .zip(members)
                    .filter(|(&c, _)| self.kept[c])
                    .map(|(&c, v)| self.apply_field(c, v))
                    .collect(),
            ),
            Value::Collection(items) => {
                let item = self.source.children(field)[0];
                Value::Collection(items.iter().map(|v| self.apply_field(item, v)).collect())
            }
            leaf => leaf.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn event_spec() -> TypeSpec {
        TypeSpec::parse("{fId: i64, fTracks: vec<{fEnergy: f32, fIds: vec<i32>}>}").unwrap()
    }

    fn track(energy: f32, ids: &[i32]) -> Value {
        Value::Record(vec![
            Value::F32(energy),
            Value::Collection(ids.iter().map(|&i| Value::I32(i)).collect()),
        ])
    }

    #[test]
    fn figure_one_tree() {
        let tree = FieldTree::build("Event", &event_spec()).unwrap();
        let described: Vec<_> = (0..tree.fields().len())
            .map(|i| (tree.path(i), tree.field(i).kind, tree.field(i).leaf_type))
            .collect();
        assert_eq!(
            described,
            vec![
                ("".to_string(), FieldKind::Record, None),
                ("fId".to_string(), FieldKind::Leaf, Some(LeafType::I64)),
                ("fTracks".to_string(), FieldKind::Collection, None),
                ("fTracks._0".to_string(), FieldKind::Record, None),
                ("fTracks._0.fEnergy".to_string(), FieldKind::Leaf, Some(LeafType::F32)),
                ("fTracks._0.fIds".to_string(), FieldKind::Collection, None),
                ("fTracks._0.fIds._0".to_string(), FieldKind::Leaf, Some(LeafType::I32)),
            ]
        );
        assert_eq!(tree.root_name(), "Event");
        for (id, f) in tree.fields().iter().enumerate() {
            if let Some(p) = f.parent {
                assert!(p < id);
            }
        }
    }

    #[test]
    fn figure_one_columns() {
        let tree = FieldTree::build("Event", &event_spec()).unwrap();
        let cols: Vec<_> = tree
            .columns()
            .iter()
            .map(|c| (tree.path(c.source_field), c.role, c.element_type))
            .collect();
        assert_eq!(
            cols,
            vec![
                ("fId".into(), ColumnRole::Value, ElementType::Leaf(LeafType::I64)),
                ("fTracks".into(), ColumnRole::Offset, ElementType::U64),
                ("fTracks._0.fEnergy".into(), ColumnRole::Value, ElementType::Leaf(LeafType::F32)),
                ("fTracks._0.fIds".into(), ColumnRole::Offset, ElementType::U64),
                ("fTracks._0.fIds._0".into(), ColumnRole::Value, ElementType::Leaf(LeafType::I32)),
            ]
        );
        for (i, c) in tree.columns().iter().enumerate() {
            assert_eq!(c.column_id, i);
        }
    }

    #[test]
    fn minimal_and_sibling_schemas() {
        let single = FieldTree::build("x", &TypeSpec::Leaf(LeafType::F64)).unwrap();
        assert_eq!(single.fields().len(), 1);
        assert_eq!(single.n_columns(), 1);
        assert_eq!(single.columns()[0].role, ColumnRole::Value);

        let siblings = FieldTree::build("r", &TypeSpec::parse("{a: f32, b: i32}").unwrap()).unwrap();
        let types: Vec<_> = siblings.columns().iter().map(|c| c.element_type).collect();
        assert_eq!(
            types,
            vec![ElementType::Leaf(LeafType::F32), ElementType::Leaf(LeafType::I32)]
        );
    }

    #[test]
    fn collection_of_collections() {
        let tree = FieldTree::build("m", &TypeSpec::parse("vec<vec<i32>>").unwrap()).unwrap();
        let roles: Vec<_> = tree.columns().iter().map(|c| (c.role, c.element_type)).collect();
        assert_eq!(
            roles,
            vec![
                (ColumnRole::Offset, ElementType::U64),
                (ColumnRole::Offset, ElementType::U64),
                (ColumnRole::Value, ElementType::Leaf(LeafType::I32)),
            ]
        );
    }

    #[test]
    fn build_errors() {
        let dup = TypeSpec::record([("a", TypeSpec::Leaf(LeafType::I32)), ("a", TypeSpec::Leaf(LeafType::F32))]);
        assert!(matches!(FieldTree::build("r", &dup), Err(Error::DuplicateField { .. })));
        assert!(matches!(
            FieldTree::build("r", &TypeSpec::Record(vec![])),
            Err(Error::EmptyRecord(_))
        ));
        assert!(matches!(TypeSpec::parse("{a: string}"), Err(Error::UnsupportedLeafType(_))));
        assert!(matches!(TypeSpec::parse("vec<i32"), Err(Error::TypeSyntax(_))));
        assert!(matches!(FieldTree::build("", &TypeSpec::Leaf(LeafType::I32)), Err(Error::InvalidName(_))));
    }

    #[test]
    fn build_is_idempotent_and_encoding_deterministic() {
        let a = FieldTree::build("Event", &event_spec()).unwrap();
        let b = FieldTree::build("Event", &event_spec()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.encode(), b.encode());
        assert_eq!(FieldTree::decode(&a.encode()).unwrap(), a);
        assert_eq!(a.type_spec(0), event_spec());
        assert_eq!(TypeSpec::parse(&event_spec().to_string()).unwrap(), event_spec());
    }

    #[test]
    fn single_leaf_encoding_layout() {
        let tree = FieldTree::build("x", &TypeSpec::Leaf(LeafType::F64)).unwrap();
        let mut expected = vec![1, 0, 0, 0, 0, 0, 0, 0, 0xFF, 0xFF, 0xFF, 0xFF, 2, 3, 1, 0];
        expected.push(b'x');
        assert_eq!(tree.encode(), expected);
    }

    #[test]
    fn decode_rejects_bad_order() {
        let tree = FieldTree::build("r", &TypeSpec::parse("{a: {b: i32}, c: i32}").unwrap()).unwrap();
        let mut fields = tree.fields().to_vec();
        // make `c` a child of `a` after `b`'s subtree closed; still pre-order
        fields[3].parent = Some(1);
        assert!(FieldTree::from_fields(fields.clone()).is_ok());
        // `c` claims `b` as parent, but `b` is a leaf
        fields[3].parent = Some(2);
        assert!(FieldTree::from_fields(fields).is_err());
        assert!(FieldTree::decode(&[5, 0, 0, 0]).is_err());
    }

    #[test]
    fn shred_table_one() {
        let tree = FieldTree::build("Event", &event_spec()).unwrap();
        let mut bases = vec![0; tree.n_columns()];
        let e1 = Value::Record(vec![
            Value::I64(6873),
            Value::Collection(vec![track(25.4, &[42, 27]), track(32.8, &[16])]),
        ]);
        let cols = tree.shred_entry(&e1, &mut bases).unwrap();
        assert_eq!(cols[0], vec![Element::I64(6873)]);
        assert_eq!(cols[1], vec![Element::Offset(2)]);
        assert_eq!(cols[2], vec![Element::F32(25.4), Element::F32(32.8)]);
        assert_eq!(cols[3], vec![Element::Offset(2), Element::Offset(3)]);
        assert_eq!(cols[4], vec![Element::I32(42), Element::I32(27), Element::I32(16)]);

        let e2 = Value::Record(vec![Value::I64(6874), Value::Collection(vec![track(14.7, &[21, 8])])]);
        let cols = tree.shred_entry(&e2, &mut bases).unwrap();
        assert_eq!(cols[0], vec![Element::I64(6874)]);
        assert_eq!(cols[1], vec![Element::Offset(3)]);
        assert_eq!(cols[2], vec![Element::F32(14.7)]);
        assert_eq!(cols[3], vec![Element::Offset(5)]);
        assert_eq!(cols[4], vec![Element::I32(21), Element::I32(8)]);
    }

    #[test]
    fn shred_empty_collections_repeat_base() {
        let tree = FieldTree::build("Event", &event_spec()).unwrap();
        let mut bases = vec![0, 7, 0, 11, 0];
        let e = Value::Record(vec![Value::I64(1), Value::Collection(vec![])]);
        let cols = tree.shred_entry(&e, &mut bases).unwrap();
        assert_eq!(cols[1], vec![Element::Offset(7)]);
        assert!(cols[2].is_empty() && cols[3].is_empty() && cols[4].is_empty());
        assert_eq!(bases, vec![0, 7, 0, 11, 0]);
    }

    #[test]
    fn shred_type_mismatch_is_atomic() {
        let tree = FieldTree::build("Event", &event_spec()).unwrap();
        let mut bases = vec![0; 5];
        let bad = Value::Record(vec![
            Value::I64(1),
            Value::Collection(vec![track(1.0, &[1]), Value::Record(vec![Value::I32(3), Value::Collection(vec![])])]),
        ]);
        let mut emitted = 0;
        let err = tree.shred_into(&bad, &mut bases, &mut |_, _| {
            emitted += 1;
            Ok(())
        });
        match err {
            Err(Error::TypeMismatch { path, .. }) => assert_eq!(path, "fTracks._0.fEnergy"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(emitted, 0);
        assert_eq!(bases, vec![0; 5]);
    }

    #[test]
    fn projection_closes_over_ancestors() {
        let tree = FieldTree::build("Event", &event_spec()).unwrap();
        let p = tree.project(&["fTracks._0.fIds"]).unwrap();
        assert_eq!(p.tree().type_spec(0).to_string(), "{fTracks: vec<{fIds: vec<i32>}>}");
        assert_eq!(p.source_columns(), vec![false, true, false, true, true]);
        let e = Value::Record(vec![Value::I64(3), Value::Collection(vec![track(2.0, &[5])])]);
        let projected = p.apply(&e);
        p.tree().check_entry(&projected).unwrap();
        assert!(tree.project(&["nope"]).is_err());
        assert_eq!(tree.project::<&str>(&[]).unwrap().tree(), &tree);
    }

    #[test]
    fn value_order_is_total() {
        assert_eq!(Value::F32(f32::NAN), Value::F32(f32::NAN));
        assert_ne!(Value::F64(0.0), Value::F64(-0.0));
        let mut v = vec![Value::I32(3), Value::I32(1), Value::I32(2)];
        v.sort();
        assert_eq!(v, vec![Value::I32(1), Value::I32(2), Value::I32(3)]);
    }
}
