from .motion_net import (MotionDataError, MotionDecision, MotionVerifierModel,
                         train_motion_verifier, verify_motion)
from .profile import (EnrollmentError, ProfileStateError, UserProfile, enroll,
                      update_profile, verify_consistency)
from .svm import DegenerateDataError, SVMError, SVMModel, train_svm

__all__ = [
    "MotionDataError", "MotionDecision", "MotionVerifierModel", "train_motion_verifier",
    "verify_motion", "EnrollmentError", "ProfileStateError", "UserProfile", "enroll",
    "update_profile", "verify_consistency", "DegenerateDataError", "SVMError", "SVMModel",
    "train_svm",
]
