"""Learning components: networks, replay memory, soft Q-learning maths and training."""
