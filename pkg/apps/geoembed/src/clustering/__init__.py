# K-means, agglomerative clustering and silhouette scoring
from .agglomerative import agglomerative_cluster
from .cluster_models import ClusterAssignment, QualityReport, QualityRow
from .kmeans import kmeans
from .quality import compression_quality
from .silhouette import silhouette_score
