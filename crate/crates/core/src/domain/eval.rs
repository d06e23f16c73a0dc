use super::types::{Atom, Binding, Fact, Formula, Literal, State, Term};
use super::{Domain, DomainError};

pub(crate) fn ground_atom(atom: &Atom, binding: &Binding) -> Result<Fact, DomainError> {
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Constant(c) => Ok(c.clone()),
            Term::Variable(v) => binding
                .get(v)
                .map(str::to_string)
                .ok_or_else(|| DomainError::UnboundVariable(v.clone())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Fact {
        predicate: atom.predicate.clone(),
        args,
    })
}

fn holds_fact(domain: &Domain, state: &State, fact: &Fact) -> Result<bool, DomainError> {
    if domain.predicates().contains_key(&fact.predicate) {
        return Ok(state.contains(fact));
    }
    let Some(axiom) = domain.axiom(&fact.predicate) else {
        return Err(DomainError::UnknownPredicate(fact.predicate.clone()));
    };
    let local: Binding = axiom
        .params
        .iter()
        .cloned()
        .zip(fact.args.iter().cloned())
        .collect();
    eval_formula(domain, state, &axiom.body, &local)
}

fn eval_formula(
    domain: &Domain,
    state: &State,
    formula: &Formula,
    binding: &Binding,
) -> Result<bool, DomainError> {
    match formula {
        Formula::Atom(a) => holds_fact(domain, state, &ground_atom(a, binding)?),
        Formula::Not(b) => Ok(!eval_formula(domain, state, b, binding)?),
        Formula::And(fs) => {
            for f in fs {
                if !eval_formula(domain, state, f, binding)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Or(fs) => {
            for f in fs {
                if eval_formula(domain, state, f, binding)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::ForAll { var, ty, body } | Formula::Exists { var, ty, body } => {
            let universal = matches!(formula, Formula::ForAll { .. });
            let objects = domain
                .objects_of(ty)
                .ok_or_else(|| DomainError::UnknownType(ty.clone()))?;
            for obj in objects {
                let inner = binding.clone().with(var, obj);
                let v = eval_formula(domain, state, body, &inner)?;
                if universal && !v {
                    return Ok(false);
                }
                if !universal && v {
                    return Ok(true);
                }
            }
            Ok(universal)
        }
    }
}

/// Whether `condition` holds in `state` under `binding`. Base predicates are
/// checked by membership, negation is negation as failure, and axiom
/// references evaluate the axiom body.
pub fn evaluate(
    domain: &Domain,
    state: &State,
    condition: &Literal,
    binding: &Binding,
) -> Result<bool, DomainError> {
    let fact = ground_atom(&condition.atom, binding)?;
    let v = holds_fact(domain, state, &fact)?;
    Ok(v == condition.positive)
}

/// Every binding extending `seed` under which all `conditions` hold.
///
/// Conditions are processed left to right. A positive literal over a base
/// predicate binds its free variables by matching state facts; a positive
/// axiom reference enumerates declared constants for its free variables. The
/// result is therefore ordered lexicographically by the values of the
/// variables in the order they are first bound.
pub fn satisfiers(
    domain: &Domain,
    state: &State,
    conditions: &[Literal],
    seed: &Binding,
) -> Result<Vec<Binding>, DomainError> {
    let mut out = Vec::new();
    extend(domain, state, conditions, seed.clone(), &mut out)?;
    Ok(out)
}

fn extend(
    domain: &Domain,
    state: &State,
    conditions: &[Literal],
    binding: Binding,
    out: &mut Vec<Binding>,
) -> Result<(), DomainError> {
    let Some((lit, rest)) = conditions.split_first() else {
        out.push(binding);
        return Ok(());
    };

    let mut free: Vec<&str> = Vec::new();
    for v in lit.atom.variables() {
        if binding.get(v).is_none() && !free.contains(&v) {
            free.push(v);
        }
    }

    if free.is_empty() {
        if evaluate(domain, state, lit, &binding)? {
            extend(domain, state, rest, binding, out)?;
        }
        return Ok(());
    }
    if !lit.positive {
        return Err(DomainError::UnboundVariable(free[0].to_string()));
    }

    if let Some(&arity) = domain.predicates().get(&lit.atom.predicate) {
        if arity != lit.atom.args.len() {
            return Ok(());
        }
        for fact in state.with_predicate(&lit.atom.predicate) {
            if let Some(b) = unify(&lit.atom.args, &fact.args, &binding) {
                extend(domain, state, rest, b, out)?;
            }
        }
        return Ok(());
    }
    if domain.axiom(&lit.atom.predicate).is_none() {
        return Err(DomainError::UnknownPredicate(lit.atom.predicate.clone()));
    }

    // Axiom with free variables: odometer over the sorted constant universe,
    // first free variable most significant.
    let universe = domain.constants();
    if universe.is_empty() {
        return Ok(());
    }
    let mut idx = vec![0usize; free.len()];
    loop {
        let mut b = binding.clone();
        for (v, &i) in free.iter().zip(&idx) {
            b.insert(*v, universe[i].as_str());
        }
        if evaluate(domain, state, lit, &b)? {
            extend(domain, state, rest, b, out)?;
        }
        let mut k = free.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < universe.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Matches terms against constants, extending `binding`.
pub(crate) fn unify(terms: &[Term], values: &[String], binding: &Binding) -> Option<Binding> {
    if terms.len() != values.len() {
        return None;
    }
    let mut b = binding.clone();
    for (t, v) in terms.iter().zip(values) {
        match t {
            Term::Constant(c) if c == v => {}
            Term::Constant(_) => return None,
            Term::Variable(x) => match b.get(x) {
                Some(existing) if existing == v => {}
                Some(_) => return None,
                None => b.insert(x.as_str(), v.as_str()),
            },
        }
    }
    Some(b)
}
