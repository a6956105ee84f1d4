//! Built-in models: the online shopping scenario, scaled by users, products and sessions, and a
//! small bonus desk that drives every update path of the translation (duplicate adds, failed
//! adds, blocked deletes, delete-then-add of one fact, domain-only violations).

use std::collections::{BTreeMap, BTreeSet};

use rust_decimal::Decimal;

use crate::dbnet::{ActionBinding, DbNet, Place, PlaceKind, Snapshot, Transition};
use crate::fresh::{FreshMode, FreshPolicy, SampleDomains};
use crate::marking::ArcInscription;
use crate::query::{Atom, Conjunct, UcqQuery};
use crate::relational::{Action, Constraint, FactTemplate, RelationSchema, Schema};
use crate::term::{Guard, Literal, Term};
use crate::value::{Name, Value, INT, REAL, STRING};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CartParams {
    pub users: usize,
    pub products: usize,
    pub sessions: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams { users: 1, products: 1, sessions: 1 }
    }
}

pub const BUILTIN: [&str; 2] = ["shopping-cart", "bonus-desk"];

pub fn builtin(name: &str, params: CartParams) -> Option<DbNet> {
    match name {
        "shopping-cart" => Some(shopping_cart(params)),
        "bonus-desk" => Some(bonus_desk()),
        _ => None,
    }
}

fn v(n: &str) -> Term {
    Term::var(n)
}

fn s(x: &str) -> Value {
    Value::text(STRING, x)
}

fn arc(p: &str, vs: &[&str]) -> ArcInscription {
    ArcInscription::new(p, vs.iter().map(|x| v(x)).collect())
}

fn fact(rel: &str, vs: &[&str]) -> FactTemplate {
    FactTemplate { relation: rel.into(), terms: vs.iter().map(|x| v(x)).collect() }
}

fn typed(vs: &[(&str, &str)]) -> Vec<(Name, Name)> {
    vs.iter().map(|(a, b)| ((*a).into(), (*b).into())).collect()
}

fn query(name: &str, free: &[(&str, &str)], existential: &[(&str, &str)], atoms: Vec<Atom>, filters: Vec<Literal>) -> UcqQuery {
    UcqQuery { name: name.into(), free: typed(free), disjuncts: vec![Conjunct { existential: typed(existential), atoms, filters }] }
}

fn atom(rel: &str, vs: &[&str]) -> Atom {
    Atom { relation: rel.into(), terms: vs.iter().map(|x| v(x)).collect() }
}

fn action(name: &str, params: &[(&str, &str)], adds: Vec<FactTemplate>, dels: Vec<FactTemplate>) -> Action {
    Action { name: name.into(), params: typed(params), adds, dels }
}

fn control(name: &str, color: &[&str]) -> Place {
    Place { name: name.into(), color: color.iter().map(|c| (*c).into()).collect(), kind: PlaceKind::Control }
}

fn view(name: &str, color: &[&str], q: &str) -> Place {
    Place { name: name.into(), color: color.iter().map(|c| (*c).into()).collect(), kind: PlaceKind::View { query: q.into() } }
}

fn bind(a: &str, args: &[&str]) -> Option<ActionBinding> {
    Some(ActionBinding { action: a.into(), args: args.iter().map(|x| v(x)).collect() })
}

fn by_name<T>(items: Vec<T>, key: impl Fn(&T) -> Name) -> BTreeMap<Name, T> {
    items.into_iter().map(|x| (key(&x), x)).collect()
}

fn bonus_schema(allowed: &[&str]) -> Schema {
    let mut schema = Schema::default();
    schema.add_relation(RelationSchema::new("User", &[("ID", INT), ("card", STRING)]));
    schema.add_relation(RelationSchema::new("WithBonus", &[("UID", INT), ("type", STRING)]));
    schema.constraints = vec![
        Constraint::PrimaryKey { relation: "User".into(), cols: vec![0] },
        Constraint::PrimaryKey { relation: "WithBonus".into(), cols: vec![0] },
        Constraint::ForeignKey { from: "WithBonus".into(), from_cols: vec![0], to: "User".into(), to_cols: vec![0] },
        Constraint::Domain { relation: "WithBonus".into(), col: 1, allowed: allowed.iter().map(|x| s(x)).collect() },
    ];
    schema
}

const PRODUCT_NAMES: [&str; 6] = ["tv", "radio", "phone", "laptop", "camera", "watch"];

/// Shopping cart with bounded sessions: each `Idle` token allows one log-in, each session buys
/// exactly one product.
pub fn shopping_cart(p: CartParams) -> DbNet {
    let mut schema = bonus_schema(&["50%", "15eur", "extra_item"]);
    schema.add_relation(RelationSchema::new("Product", &[("Name", STRING)]));
    schema.add_relation(RelationSchema::new("InWarehouse", &[("PID", INT), ("name", STRING), ("cost", REAL)]));
    schema.constraints.extend([
        Constraint::PrimaryKey { relation: "Product".into(), cols: vec![0] },
        Constraint::PrimaryKey { relation: "InWarehouse".into(), cols: vec![0] },
        Constraint::ForeignKey { from: "InWarehouse".into(), from_cols: vec![1], to: "Product".into(), to_cols: vec![0] },
    ]);

    let queries = vec![
        query(
            "Q_products",
            &[("pid", INT), ("n", STRING), ("c", REAL)],
            &[],
            vec![atom("Product", &["n"]), atom("InWarehouse", &["pid", "n", "c"])],
            vec![Literal::neq(v("c"), Term::Const(Value::null(REAL)))],
        ),
        query("Q_users", &[("uid", INT)], &[("card", STRING)], vec![atom("User", &["uid", "card"])], vec![]),
        query("Q_wbonus", &[("uid", INT), ("bt", STRING)], &[], vec![atom("WithBonus", &["uid", "bt"])], vec![]),
    ];
    let actions = vec![
        action("addb", &[("uid", INT), ("bt", STRING)], vec![fact("WithBonus", &["uid", "bt"])], vec![]),
        action(
            "change",
            &[("uid", INT), ("bt", STRING), ("bt2", STRING)],
            vec![fact("WithBonus", &["uid", "bt2"])],
            vec![fact("WithBonus", &["uid", "bt"])],
        ),
        action("reserve", &[("pid", INT), ("n", STRING), ("c", REAL)], vec![], vec![fact("InWarehouse", &["pid", "n", "c"])]),
        action("apply", &[("uid", INT), ("bt", STRING)], vec![], vec![fact("WithBonus", &["uid", "bt"])]),
    ];
    let places = vec![
        control("Idle", &[]),
        control("Logged", &[INT, INT]),
        control("Selected", &[INT, INT]),
        control("Cart", &[INT, INT, STRING, REAL]),
        control("ReBonus", &[INT, INT, STRING]),
        control("Checked", &[INT, INT]),
        control("Reserved", &[INT, INT, REAL]),
        control("Finished", &[INT, INT, STRING]),
        view("Users", &[INT], "Q_users"),
        view("Products", &[INT, STRING, REAL], "Q_products"),
        view("BonusHolders", &[INT, STRING], "Q_wbonus"),
    ];

    let mut login = Transition::new("LogIn");
    login.inputs = vec![arc("Idle", &[])];
    login.reads = vec![arc("Users", &["uid"])];
    login.outputs = vec![arc("Logged", &["uid", "cid"])];
    login.fresh = BTreeSet::from(["cid".into()]);

    let mut acquire = Transition::new("AcquireBonus");
    acquire.inputs = vec![arc("Logged", &["uid", "cid"])];
    acquire.outputs = vec![arc("Logged", &["uid", "cid"])];
    acquire.rollbacks = vec![arc("ReBonus", &["uid", "cid", "bt"])];
    acquire.action = bind("addb", &["uid", "bt"]);

    let mut change = Transition::new("ChangeBonus");
    change.inputs = vec![arc("ReBonus", &["uid", "cid", "bt"])];
    change.reads = vec![arc("BonusHolders", &["uid", "old"])];
    change.outputs = vec![arc("Logged", &["uid", "cid"])];
    change.rollbacks = vec![arc("Logged", &["uid", "cid"])];
    change.action = bind("change", &["uid", "old", "bt"]);

    let mut keep = Transition::new("KeepBonus");
    keep.inputs = vec![arc("ReBonus", &["uid", "cid", "bt"])];
    keep.outputs = vec![arc("Logged", &["uid", "cid"])];

    let mut add_product = Transition::new("AddProduct");
    add_product.inputs = vec![arc("Logged", &["uid", "cid"])];
    add_product.reads = vec![arc("Products", &["pid", "n", "c"])];
    add_product.outputs = vec![arc("Selected", &["uid", "cid"]), arc("Cart", &["cid", "pid", "n", "c"])];

    let mut checkout = Transition::new("CheckOut");
    checkout.inputs = vec![arc("Selected", &["uid", "cid"])];
    checkout.outputs = vec![arc("Checked", &["uid", "cid"])];

    let mut prepare = Transition::new("PrepareOrder");
    prepare.inputs = vec![arc("Checked", &["uid", "cid"]), arc("Cart", &["cid", "pid", "n", "c"])];
    prepare.outputs = vec![arc("Checked", &["uid", "cid"]), arc("Reserved", &["cid", "pid", "c"])];
    prepare.rollbacks = vec![arc("Checked", &["uid", "cid"]), arc("Cart", &["cid", "pid", "n", "c"])];
    prepare.action = bind("reserve", &["pid", "n", "c"]);

    let mut finish = Transition::new("FinishOrder");
    finish.inputs = vec![arc("Checked", &["uid", "cid"])];
    finish.outputs = vec![arc("Finished", &["uid", "cid", "dest"])];

    let mut finish_bonus = Transition::new("FinishOrderWithBonus");
    finish_bonus.inputs = vec![arc("Checked", &["uid", "cid"])];
    finish_bonus.reads = vec![arc("BonusHolders", &["uid", "bt"])];
    finish_bonus.outputs = vec![arc("Finished", &["uid", "cid", "dest"])];
    finish_bonus.action = bind("apply", &["uid", "bt"]);

    let mut initial = Snapshot::default();
    for u in 1..=p.users {
        initial.instance.insert(&"User".into(), vec![Value::int(INT, u as i64), s(&format!("card{u}"))]);
    }
    if p.users > 0 {
        initial.instance.insert(&"WithBonus".into(), vec![Value::int(INT, 1), s("50%")]);
    }
    for (i, n) in PRODUCT_NAMES.iter().cycle().take(p.products).enumerate() {
        let name = if i < PRODUCT_NAMES.len() { (*n).to_string() } else { format!("{n}{i}") };
        initial.instance.insert(&"Product".into(), vec![s(&name)]);
        let cost = Value::real(REAL, Decimal::from(100 * (i as i64 + 1)));
        initial.instance.insert(&"InWarehouse".into(), vec![Value::int(INT, i as i64 + 1), s(&name), cost]);
    }
    if p.products > 0 {
        let row = vec![Value::int(INT, p.products as i64 + 1), s(PRODUCT_NAMES[0]), Value::null(REAL)];
        initial.instance.insert(&"InWarehouse".into(), row);
    }
    initial.marking.add(&"Idle".into(), vec![], p.sessions as u32);

    let mut samples = SampleDomains::default();
    samples.by_var.insert("bt".into(), vec![s("50%"), s("15eur"), s("gift")]);
    samples.by_var.insert("dest".into(), vec![s("home")]);

    DbNet {
        name: "shopping_cart".into(),
        schema,
        queries: by_name(queries, |q| q.name.clone()),
        actions: by_name(actions, |a| a.name.clone()),
        places,
        transitions: vec![login, acquire, change, keep, add_product, checkout, prepare, finish, finish_bonus],
        initial,
        samples,
        fresh: FreshPolicy::with_mode(FreshMode::Bounded(1)),
    }
}

/// Desk tickets for users 1 (has a bonus), 2 (no bonus) and 5 (not a user).
pub fn bonus_desk() -> DbNet {
    bonus_desk_with(&[1, 2, 5])
}

/// The bonus desk with one `Desk` ticket per listed user id.
pub fn bonus_desk_with(tickets: &[i64]) -> DbNet {
    let schema = bonus_schema(&["50%", "15eur"]);
    let queries = vec![
        query("Q_holders", &[("uid", INT), ("bt", STRING)], &[], vec![atom("WithBonus", &["uid", "bt"])], vec![]),
        query("Q_members", &[("uid", INT), ("card", STRING)], &[], vec![atom("User", &["uid", "card"])], vec![]),
    ];
    let actions = vec![
        action("addb", &[("uid", INT), ("bt", STRING)], vec![fact("WithBonus", &["uid", "bt"])], vec![]),
        action("renew", &[("uid", INT), ("bt", STRING)], vec![fact("WithBonus", &["uid", "bt"])], vec![fact("WithBonus", &["uid", "bt"])]),
        action("leave", &[("uid", INT), ("card", STRING)], vec![], vec![fact("User", &["uid", "card"])]),
    ];
    let places = vec![
        control("Desk", &[INT]),
        control("Retry", &[INT, STRING]),
        control("Gone", &[INT]),
        view("Holders", &[INT, STRING], "Q_holders"),
        view("Members", &[INT, STRING], "Q_members"),
    ];

    let mut grant = Transition::new("Grant");
    grant.inputs = vec![arc("Desk", &["uid"])];
    grant.outputs = vec![arc("Desk", &["uid"])];
    grant.rollbacks = vec![arc("Retry", &["uid", "bt"])];
    grant.action = bind("addb", &["uid", "bt"]);

    let mut renew = Transition::new("Renew");
    renew.inputs = vec![arc("Desk", &["uid"])];
    renew.reads = vec![arc("Holders", &["uid", "bt"])];
    renew.guard = Guard::from_literal(&Literal::neq(v("bt"), Term::Const(s("15eur"))));
    renew.outputs = vec![arc("Desk", &["uid"])];
    renew.action = bind("renew", &["uid", "bt"]);

    let mut leave = Transition::new("Leave");
    leave.inputs = vec![arc("Desk", &["uid"])];
    leave.reads = vec![arc("Members", &["uid", "card"])];
    leave.outputs = vec![arc("Gone", &["uid"])];
    leave.rollbacks = vec![arc("Desk", &["uid"])];
    leave.action = bind("leave", &["uid", "card"]);

    let mut retry = Transition::new("Retry");
    retry.inputs = vec![arc("Retry", &["uid", "bt"])];
    retry.outputs = vec![arc("Desk", &["uid"])];

    let mut initial = Snapshot::default();
    initial.instance.insert(&"User".into(), vec![Value::int(INT, 1), s("visa")]);
    initial.instance.insert(&"User".into(), vec![Value::int(INT, 2), s("amex")]);
    initial.instance.insert(&"WithBonus".into(), vec![Value::int(INT, 1), s("50%")]);
    for &uid in tickets {
        initial.marking.add(&"Desk".into(), vec![Value::int(INT, uid)], 1);
    }
    let mut samples = SampleDomains::default();
    samples.by_var.insert("bt".into(), vec![s("50%"), s("15eur"), s("gift")]);

    DbNet {
        name: "bonus_desk".into(),
        schema,
        queries: by_name(queries, |q| q.name.clone()),
        actions: by_name(actions, |a| a.name.clone()),
        places,
        transitions: vec![grant, renew, leave, retry],
        initial,
        samples,
        fresh: FreshPolicy::default(),
    }
}
