"""Random perfect information games on Galton-Watson trees.

Two players move a token down a random tree. Every node carries a capacity,
and player I receives the smallest capacity seen along the play. Every node
independently draws its player, its capacity and its number of children from
one primitive distribution.

Some core ideas

- `model` describes primitive distributions as mixtures of blocks and answers
  exact queries (survival functions, generating functions, moments).
- `vgf` computes the distribution of the game value: P(v < k) is the smallest
  fixed point of the value generating function. It also covers positivity,
  the essential supremum, critical activation probabilities and asymptotics.
- `transforms` derives the law of the game conditioned on v ≥ k and the law of
  the game where player I avoids handing real choices to player II.
- `games` samples truncated games with path-keyed randomness (`rng`) and
  solves them by backward induction.
- `montecarlo` checks sampled games against the exact numbers, `presets`
  holds reference models with closed forms and `cli` writes CSV/JSON data.
"""
