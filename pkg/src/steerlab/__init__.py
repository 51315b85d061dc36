"""steerlab: a desk-scale path-following control laboratory.

A linear-model MPC with PID feedback demonstrates lateral control online for
a deterministic actor-critic agent, trained and evaluated in a built-in 2D
single-track vehicle simulator.
"""

from .track import (PathProjection, Track, generate_circle,
                    generate_closed_course, load_track, perturb_waypoints,
                    save_track)
from .vehicle import (ControlCommand, LinearModel, VehicleParams, VehicleState,
                      discretize, linear_single_track, mismatched_params,
                      step_plant)
from .mpc_pid import (BlendWeights, MpcConfig, MpcPidController, PidGains,
                      blend, build_reference, solve_mpc)
from .longitudinal import (LongitudinalControl, LongitudinalGains, SpeedPid,
                           SpeedProfile, nedc_profile)
from .ddpg import (DdpgAgent, DdpgParams, Mlp, OuNoise, ReplayBuffer,
                   act_with_noise, actor_forward, compute_targets,
                   critic_forward, load_checkpoint, save_checkpoint)
from .training import (LrSchedule, PolicyController, RewardBreakdown,
                       TrainConfig, TrainSetup, adaptive_coefficients,
                       build_observation, cyclical_lr, demo_action_transform,
                       detach_demo, gate_action, reward_change_penalty,
                       reward_demo, reward_demo_adaptive, step_reward, train)
from .evaluation import (EpisodeLog, MetricsReport, compare_runtimes, metrics,
                         run_episode, sweep)

__version__ = "0.1.0"
