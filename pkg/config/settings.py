"""
Configuration settings for the fashion-guided texture attack engine
"""

import os


class Settings:
    """Application settings and configuration"""

    # Application metadata
    APP_NAME = "FashionAdv Texture Attack Engine"
    APP_VERSION = "1.0.0"

    # File settings
    IMAGE_SUFFIX = '.png'
    MASK_SUFFIX = '.mask.png'
    MANIFEST_NAME = 'manifest.jsonl'
    RUN_MANIFEST_NAME = 'run_manifest.json'

    # Synthetic dataset defaults
    DATASET = {
        'height': 96,
        'width': 96,
        'min_persons': 1,
        'max_persons': 3,
        'person_height': (0.42, 0.78),
        'width_ratio': (0.38, 0.46),
        'head_ratio': (0.16, 0.2),
        'torso_ratio': (0.36, 0.42),
        'background': 'clutter',
        'max_retries': 64,
        'n_train': 1000,
        'n_test': 1000,
        'n_styles': 140,
        'style_size': 64,
        'style_min_distance': 0.02,
    }

    # Loss weights (alpha, beta, lambda1, lambda2)
    LOSS_WEIGHTS = {
        'alpha': 0.2,
        'beta': 5e3,
        'lambda1': 0.75,
        'lambda2': 1e-6,
        'cls_weight': 1.0,
        'mask_weight': 1.0,
    }

    # Feature extractor
    FEATURES = {
        'widths': (8, 16, 32, 32, 32),
        'convs_per_stage': (1, 1, 1, 2, 1),
        'content_taps': ('conv4_2',),
        'style_taps': ('conv1_1', 'conv2_1', 'conv3_1', 'conv4_1', 'conv5_1'),
        'seed': 1234,
        'std_epsilon': 1e-8,
    }

    # SSIM family
    SSIM = {
        'window': 11,
        'sigma': 1.5,
        'k1': 0.01,
        'k2': 0.03,
        'scale_weights': (0.0448, 0.2856, 0.3001, 0.2363, 0.1333),
    }

    # Perturbation pipeline ranges
    EOT_RANGES = {
        'corner_shift': 0.2,
        'blur_kernels': (1, 3, 5, 7, 9, 11),
        'blur_sigma': (0.1, 3.0),
        'hue': 0.02,
        'saturation': 0.2,
        'brightness': 0.2,
        'contrast': 0.2,
        'noise': 0.02,
        'jpeg_qf': (18, 22),
        'max_retries': 16,
    }

    # Segmenter architecture and training
    SEGMENTER = {
        'image_size': 96,
        'widths': (16, 32, 48, 64),
        'head_width': 64,
        'proto_width': 32,
        'num_prototypes': 8,
        'anchor_shapes': ((16, 38), (22, 52), (30, 70)),
        'positive_iou': 0.5,
        'negative_iou': 0.3,
        'negative_ratio': 3,
        'prior_prob': 0.05,
        'epochs': 20,
        'lr': 1e-3,
        'batch_size': 8,
    }

    DECODE = {
        'score_thresh': 0.3,
        'nms_iou': 0.5,
        'mask_bin': 0.5,
    }

    # Attack loop
    ATTACK = {
        'iterations': 200,
        'lr': 0.02,
        'init_amplitude': 0.03,
        'style_mode': 'optimal',
        'tau_ref': 0.3,
        'suite_size': 50,
        'divergence_guard': True,
    }

    ADAM = {
        'beta1': 0.9,
        'beta2': 0.999,
        'eps': 1e-8,
    }

    BASELINE = {
        'epsilon': 0.03,
        'steps': 10,
        'step_size': 0.005,
        'step_size_grid': (0.0025, 0.005, 0.01),
        'epsilon_grid': (0.01, 0.02, 0.03),
    }

    # Evaluation protocols
    EVALUATION = {
        'iou_thresholds': (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95),
        'recall_points': 101,
        'qfs': (10, 20, 40, 60, 80, 100),
        'modes': ('easy', 'hard'),
    }

    MANIPULATIONS = {
        'easy': {
            'scale_range': (0.8, 1.2),
            'blur_kernel': 5,
            'color_jitter': 'histogram_equalization',
            'noise': 0.05,
        },
        'hard': {
            'scale_range': (0.5, 1.5),
            'blur_kernel': 9,
            'color_jitter': 'channel_shift',
            'channel_shift': 0.2,
            'noise': 0.15,
        },
    }

    # Finite-difference oracle
    GRADCHECK = {
        'step': 1e-5,
        'tol': 1e-4,
        'max_coords': 48,
        'seeds': (0, 1, 2),
    }

    # Logging settings
    LOG_SETTINGS = {
        'level': 'INFO',
        'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        'date_format': '%Y-%m-%d %H:%M:%S',
    }

    @classmethod
    def get_data_directory(cls) -> str:
        """Get default dataset directory"""
        return os.path.join(os.getcwd(), 'data')
