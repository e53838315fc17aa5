//! The order/shipping-fee example used throughout tests, docs and demos.

use std::sync::Arc;

use crate::dsl::parse_statement;
use crate::relation::{Database, Relation};
use crate::statement::{Modification, Statement};
use crate::value::{Schema, Type, Value};

pub const U1: &str = "UPDATE Order SET ShippingFee = 0 WHERE Price >= 50";
pub const U1_PRIME: &str = "UPDATE Order SET ShippingFee = 0 WHERE Price >= 60";
pub const U2: &str = "UPDATE Order SET ShippingFee = ShippingFee + 5 WHERE Country = 'UK' AND Price <= 100";
pub const U3: &str = "UPDATE Order SET ShippingFee = ShippingFee - 2 WHERE Price <= 30 AND ShippingFee >= 10";
pub const U3_PRIME: &str = "UPDATE Order SET ShippingFee = ShippingFee - 2 WHERE Price <= 40 AND ShippingFee >= 10";

pub fn order_schema() -> Arc<Schema> {
    Arc::new(
        Schema::new(
            "Order",
            &[
                ("ID", Type::Integer),
                ("Customer", Type::Text),
                ("Country", Type::Text),
                ("Price", Type::Integer),
                ("ShippingFee", Type::Integer),
            ],
        )
        .expect("valid schema"),
    )
}

pub fn order_row(id: i64, customer: &str, country: &str, price: i64, fee: i64) -> Vec<Value> {
    vec![id.into(), customer.into(), country.into(), price.into(), fee.into()]
}

/// The four initial orders.
pub fn order_db() -> Database {
    let rows = vec![
        order_row(11, "Susan", "UK", 20, 5),
        order_row(12, "Alex", "UK", 50, 5),
        order_row(13, "Jack", "US", 60, 3),
        order_row(14, "Mark", "US", 30, 4),
    ];
    Database::new().with(Relation::checked(order_schema(), rows).expect("valid rows"))
}

fn parse(s: &str) -> Statement {
    parse_statement(s).expect("fixture statement parses")
}

/// `u1, u2, u3`.
pub fn order_history() -> Vec<Statement> {
    vec![parse(U1), parse(U2), parse(U3)]
}

/// Replaces `u1` with the stricter free-shipping threshold.
pub fn order_mods() -> Vec<Modification> {
    vec![Modification::Replace {
        pos: 1,
        statement: parse(U1_PRIME),
    }]
}

/// Replaces `u3` with the wider discount range.
pub fn order_mods_u3() -> Vec<Modification> {
    vec![Modification::Replace {
        pos: 3,
        statement: parse(U3_PRIME),
    }]
}

pub const ORDER_SCHEMA_JSON: &str = r#"{
  "name": "Order",
  "attributes": [
    {"name": "ID", "type": "integer"},
    {"name": "Customer", "type": "text"},
    {"name": "Country", "type": "text"},
    {"name": "Price", "type": "integer"},
    {"name": "ShippingFee", "type": "integer"}
  ]
}
"#;

pub const ORDER_CSV: &str = "ID,Customer,Country,Price,ShippingFee
11,Susan,UK,20,5
12,Alex,UK,50,5
13,Jack,US,60,3
14,Mark,US,30,4
";
