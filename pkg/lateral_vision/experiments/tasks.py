from typing import Any, Dict

from celery import app
from celery.utils.log import get_task_logger

from .serializers import load_manifest
from .services import ExperimentServiceProvider

logger = get_task_logger(__name__)


@app.shared_task(soft_time_limit=60 * 60)
def run_fold_task(manifest_data: Dict[str, Any], fold: int) -> Dict[str, Any]:
    """
    Train the models of one fold and evaluate both systems on every condition of the manifest
    :param manifest_data: run manifest, as written on `manifest.json`
    :param fold: index of the fold on the plan of the manifest
    :return: `FoldResult` as a dictionary
    """
    manifest = load_manifest(manifest_data)
    logger.info('Starting fold %d of run %s', fold, manifest.name)
    result = ExperimentServiceProvider().run_fold(manifest, fold)
    logger.info('Finished fold %d of run %s', fold, manifest.name)
    return result.to_dict()
