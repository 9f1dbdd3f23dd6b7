use crate::efg_model::GameTree;
use crate::sequence_form::SequenceGame;
use nalgebra::DVector;

/// Maps utilities to losses in [0, 1] per player:
/// `û = (u_max − u) / (u_max − u_min)` over that player's leaf utilities.
#[derive(Debug, Clone)]
pub struct LossModel {
    pub game: SequenceGame,
    pub ranges: Vec<(f64, f64)>,
}

impl LossModel {
    pub fn new(game: &GameTree) -> Self {
        LossModel {
            game: SequenceGame::new(game),
            ranges: (0..game.num_players()).map(|p| game.utility_range(p)).collect(),
        }
    }

    pub fn normalized(&self, player: usize, u: f64) -> f64 {
        let (lo, hi) = self.ranges[player];
        if hi > lo {
            (hi - u) / (hi - lo)
        } else {
            0.0
        }
    }

    /// Loss vector of `player` against the other entries of `strategies`.
    pub fn loss_vector(&self, player: usize, strategies: &[&DVector<f64>]) -> DVector<f64> {
        let (lo, hi) = self.ranges[player];
        if hi <= lo {
            return DVector::zeros(self.game.indices[player].num_sequences());
        }
        self.game.weighted_gradient(player, strategies, |u| (hi - u) / (hi - lo))
    }
}

/// One-shot form of [`LossModel::loss_vector`].
pub fn build_loss_vector(game: &GameTree, player: usize, strategies: &[&DVector<f64>]) -> DVector<f64> {
    LossModel::new(game).loss_vector(player, strategies)
}
