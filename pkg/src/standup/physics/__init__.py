from .model import RobotModel, RobotState, ModelParams, ContactParams, SimulationFault
from .terrain import Terrain, TerrainBatch
from .kinematics import forward_kinematics, point_jacobians, keypoint_summary, KeypointSummary
from .contact import compute_contact_forces, contact_force_arrays, ContactPoint
from .dynamics import pd_torque, step_dynamics, mass_matrix, bias_forces, gravity_forces

__all__ = [
    "RobotModel", "RobotState", "ModelParams", "ContactParams", "SimulationFault",
    "Terrain", "TerrainBatch",
    "forward_kinematics", "point_jacobians", "keypoint_summary", "KeypointSummary",
    "compute_contact_forces", "contact_force_arrays", "ContactPoint",
    "pd_torque", "step_dynamics", "mass_matrix", "bias_forces", "gravity_forces",
]
