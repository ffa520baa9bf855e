//! Per-author note colors.

use serde::{Deserialize, Serialize};

use super::model::WorkspaceState;
use crate::ids::UserId;

/// Twelve pairwise-distinct note colors; the thirteenth participant wraps
/// around to the first.
pub const PALETTE: [&str; 12] = [
    "#F6C445", "#7BC8F6", "#F58BA8", "#8FD694", "#B39DDB", "#FFAB76",
    "#4DB6AC", "#E57373", "#A1887F", "#90A4AE", "#DCE775", "#64B5F6",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Color(pub &'static str);

/// Color by participant order: the nth distinct author of a workspace gets
/// `PALETTE[n % 12]`. A user who has not authored anything yet is colored
/// as the next participant would be.
pub fn color_for_user(state: &WorkspaceState, user: &UserId) -> Color {
    let index = state
        .participants
        .iter()
        .position(|p| p == user)
        .unwrap_or(state.participants.len());
    Color(PALETTE[index % PALETTE.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::WorkspaceId;

    fn with_participants(n: usize) -> WorkspaceState {
        let mut s = WorkspaceState::new(WorkspaceId::new("ws"));
        s.participants = (1..=n).map(|i| UserId::new(format!("u{i}"))).collect();
        s
    }

    #[test]
    fn same_user_same_color() {
        let s = with_participants(3);
        let u = UserId::new("u2");
        assert_eq!(color_for_user(&s, &u), color_for_user(&s, &u));
    }

    #[test]
    fn first_twelve_users_are_distinct() {
        let s = with_participants(13);
        let mut colors: Vec<_> = (1..=12)
            .map(|i| color_for_user(&s, &UserId::new(format!("u{i}"))))
            .collect();
        colors.sort_by_key(|c| c.0);
        colors.dedup();
        assert_eq!(colors.len(), 12);
    }

    #[test]
    fn thirteenth_user_cycles_back() {
        let s = with_participants(13);
        assert_eq!(
            color_for_user(&s, &UserId::new("u13")),
            color_for_user(&s, &UserId::new("u1"))
        );
    }
}
