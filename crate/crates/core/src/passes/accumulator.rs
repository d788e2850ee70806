//! Hoists reductions whose target is fixed across inner loops into a
//! scalar accumulator.
//!
//! A statement writing `y[i]` from inside the `j` loop re-reduces into
//! memory every iteration. When the deepest loop variable the target
//! mentions sits above other loops, the statement instead reduces into a
//! named scalar scoped at that depth, and the scalar folds into the
//! target once per iteration of its loop, only if it was touched.

use crate::ir::{CompiledKernel, Target, WorkspaceDecl};

pub fn hoist_accumulator(kernel: &mut CompiledKernel) {
    let mut next_id = 0usize;
    for nest in &mut kernel.nests {
        let innermost = match nest.loops.len() {
            0 => continue,
            n => n - 1,
        };
        let loops = nest.loops.clone();
        let mut decls: Vec<WorkspaceDecl> = Vec::new();
        for block in &mut nest.blocks {
            for s in &mut block.stmts {
                let access = match &s.target {
                    Target::Access(a) => a.clone(),
                    Target::Workspace(_) => continue,
                };
                let depth = access
                    .indices
                    .iter()
                    .filter_map(|v| loops.iter().position(|l| l == v))
                    .max()
                    .unwrap_or(0);
                if depth >= innermost {
                    continue;
                }
                let id = match decls.iter().find(|d| d.target == access) {
                    Some(d) => d.id,
                    None => {
                        let id = next_id;
                        next_id += 1;
                        decls.push(WorkspaceDecl {
                            id,
                            name: format!("t{id}"),
                            depth,
                            target: access,
                        });
                        id
                    }
                };
                s.target = Target::Workspace(id);
            }
        }
        nest.workspaces.extend(decls);
    }
}
