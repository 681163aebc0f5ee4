//! Async client for the ediref HTTP service.

use ediref_core::api::{
    ApiError, Command, EvaluateRequest, Health, LrResponse, ParseRequest, RenderRequest, RenderResponse, RunRequest,
};
use ediref_core::evalkit::EvaluationReport;
use ediref_core::pipeline::RunOutcome;
use ediref_core::promptlab::ParsedAnswer;
use ediref_core::ErrorKind;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{}", .0.message)]
    Api(ApiError),
    #[error("cannot reach ediref service at {base}: {source}")]
    Transport {
        base: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("unexpected response ({status}): {body}")]
    Protocol { status: u16, body: String },
}

impl ClientError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ClientError::Api(e) => e.kind,
            _ => ErrorKind::Runtime,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(&self, res: reqwest::Response) -> Result<T> {
        let status = res.status();
        let body = res.text().await.map_err(|e| self.transport(e))?;
        if status.is_success() {
            return serde_json::from_str(&body).map_err(|_| ClientError::Protocol {
                status: status.as_u16(),
                body,
            });
        }
        match serde_json::from_str::<ApiError>(&body) {
            Ok(e) => Err(ClientError::Api(e)),
            Err(_) => Err(ClientError::Protocol {
                status: status.as_u16(),
                body,
            }),
        }
    }

    fn transport(&self, source: reqwest::Error) -> ClientError {
        ClientError::Transport {
            base: self.base.clone(),
            source,
        }
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let res = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .map_err(|e| self.transport(e))?;
        self.decode(res).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let res = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .map_err(|e| self.transport(e))?;
        self.decode(res).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/health").await
    }

    pub async fn run(&self, command: Command, request: &RunRequest) -> Result<RunOutcome> {
        self.post(&format!("/v1/{}", command.as_str()), request).await
    }

    pub async fn evaluate(&self, request: &EvaluateRequest) -> Result<EvaluationReport> {
        self.post("/v1/evaluate", request).await
    }

    pub async fn render_prompt(&self, request: &RenderRequest) -> Result<String> {
        let r: RenderResponse = self.post("/v1/prompts/render", request).await?;
        Ok(r.prompt)
    }

    pub async fn parse_answer(&self, completion: &str) -> Result<ParsedAnswer> {
        self.post(
            "/v1/prompts/parse",
            &ParseRequest {
                completion: completion.to_string(),
            },
        )
        .await
    }

    pub async fn learning_rate(&self, step: u64, base: f64, warmup: u64) -> Result<f64> {
        let r: LrResponse = self
            .get(&format!("/v1/schedule/lr?step={step}&base={base}&warmup={warmup}"))
            .await?;
        Ok(r.lr)
    }
}
