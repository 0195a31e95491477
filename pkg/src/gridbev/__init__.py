"""gridbev: multi-layer BEV grid map pipeline for LiDAR object detection."""

from .anchors import AnchorConfig, AnchorGrid, MatchResult, generate_anchors, match_anchors
from .augment import AugmentConfig, augment_sample, flip_x, rotate_scene
from .boxes import BoxEncoding, EncodedBox, RotatedBox, decode, encode, rotated_iou
from .evaluation import (APResult, Difficulty, DifficultyThresholds, average_precision,
                         evaluate_dataset, match_detections)
from .grid import (FeatureConfig, GridConfig, MultiLayerGridMap, accumulate_cloud,
                   assemble_features, compute_decay_rate, point_to_cell, read_grid_map,
                   render_layer, traverse_ray_slab, write_grid_map)
from .ground import PlaneParams, RobustFitConfig, fit_ground_plane, signed_distance, split_ground
from .kitti import (CalibrationSet, DetectionRecord, GroundTruthLabel, MergedClass,
                    PointCloud, filter_camera_fov, read_calibration, read_labels,
                    read_point_cloud, write_detections)
from .losses import LossInputs, cross_entropy, multitask_loss, smooth_l1, softmax
from .raycast import backend_name

__version__ = "0.1.0"
