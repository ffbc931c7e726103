# Neural networks and Soft Actor-Critic
